use serde::{Deserialize, Serialize};

use crate::corr::PortGeometry;
use crate::moments::{gamma_moments, LinkBudget};
use crate::outage::{outage_threshold, RadioParams};

/// Which value of the selected-port gain counts as the outage threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdRule {
    /// `sqrt((2^R - 1) sigma^2 / P_S)` from the radio parameters.
    #[default]
    Rate,
    /// The mean of the per-port combined channel.
    MeanGain,
    /// An explicit value.
    Fixed(f64),
}

/// Every physical parameter of the link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub geometry: PortGeometry,
    pub budget: LinkBudget,
    pub radio: RadioParams,
    #[serde(default)]
    pub threshold: ThresholdRule,
}

impl SystemConfig {
    pub fn new(geometry: PortGeometry, budget: LinkBudget, radio: RadioParams) -> Self {
        SystemConfig {
            geometry,
            budget,
            radio,
            threshold: ThresholdRule::Rate,
        }
    }

    pub fn with_threshold(mut self, rule: ThresholdRule) -> Self {
        self.threshold = rule;
        self
    }

    /// Outage happens when the selected-port gain is at or below this value.
    pub fn threshold(&self) -> f64 {
        match self.threshold {
            ThresholdRule::Rate => outage_threshold(&self.radio),
            ThresholdRule::MeanGain => gamma_moments(&self.budget).mean,
            ThresholdRule::Fixed(y) => y,
        }
    }

    /// Mean received SNR in dB from the mean channel, `P_S E^2 / sigma^2`.
    pub fn mean_channel_snr_db(&self) -> f64 {
        let m = gamma_moments(&self.budget);
        10.0 * (self.radio.transmit_power * m.mean * m.mean / self.radio.noise_power).log10()
    }

    /// Average received SNR in dB, `P_S E(gamma^2) / sigma^2`.
    pub fn average_snr_db(&self) -> f64 {
        let m = gamma_moments(&self.budget);
        let power = m.mean * m.mean + m.variance;
        10.0 * (self.radio.transmit_power * power / self.radio.noise_power).log10()
    }
}
