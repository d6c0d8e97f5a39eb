use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corr::{BlockCountRule, PortGeometry, DEFAULT_EIGEN_THRESHOLD, DEFAULT_MU};
use crate::error::{Error, Result};
use crate::moments::LinkBudget;
use crate::outage::{BlockSource, EstimatorKind, EstimatorSettings, MvnSettings, RadioParams};
use crate::quad::{
    TruncationPolicy, DEFAULT_CHEBYSHEV_NODES, DEFAULT_MVN_POINTS, DEFAULT_MVN_REPLICATES,
};
use crate::sim::{DEFAULT_CHUNK_SIZE, DEFAULT_TRIALS};
use crate::system::{SystemConfig, ThresholdRule};

/// Largest port count evaluated with the full multivariate CDF by default.
pub const DEFAULT_MVN_DIMENSION_CAP: usize = 50;

/// Physical and numerical defaults of an experiment.
///
/// The channel gains may be given directly or through link distances and a
/// path-loss exponent, `eps = distance^-exponent`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Defaults {
    pub elements: usize,
    pub ports: usize,
    pub size: f64,
    pub gain_bs_ris: Option<f64>,
    pub gain_ris_user: Option<f64>,
    pub distance_bs_ris: f64,
    pub distance_ris_user: f64,
    pub pathloss_exponent: f64,
    pub transmit_power: f64,
    pub noise_power: f64,
    pub target_rate: f64,
    pub chebyshev_nodes: usize,
    pub mu: f64,
    pub eigen_threshold: f64,
    /// Switches block counting to the captured-mass rule when set.
    pub mass_fraction: Option<f64>,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            elements: 40,
            ports: 20,
            size: 1.0,
            gain_bs_ris: None,
            gain_ris_user: None,
            distance_bs_ris: 200.0,
            distance_ris_user: 200.0,
            pathloss_exponent: 2.0,
            transmit_power: 0.1,
            noise_power: 1e-8,
            target_rate: 3.0,
            chebyshev_nodes: DEFAULT_CHEBYSHEV_NODES,
            mu: DEFAULT_MU,
            eigen_threshold: DEFAULT_EIGEN_THRESHOLD,
            mass_fraction: None,
        }
    }
}

impl Defaults {
    pub fn gains(&self) -> (f64, f64) {
        let from_distance = |d: f64| d.powf(-self.pathloss_exponent);
        (
            self.gain_bs_ris
                .unwrap_or_else(|| from_distance(self.distance_bs_ris)),
            self.gain_ris_user
                .unwrap_or_else(|| from_distance(self.distance_ris_user)),
        )
    }
}

/// Swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    #[default]
    Point,
    Ports(Vec<usize>),
    Size(Vec<f64>),
    Elements(Vec<usize>),
}

impl Sweep {
    fn validate(&self) -> Result<()> {
        fn increasing<T: PartialOrd>(field: &str, values: &[T]) -> Result<()> {
            if values.is_empty() {
                return Err(Error::invalid(field, "sweep list is empty"));
            }
            if values.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid(
                    field,
                    "sweep values must be strictly increasing",
                ));
            }
            Ok(())
        }
        match self {
            Sweep::Point => Ok(()),
            Sweep::Ports(v) => increasing("sweep.ports", v),
            Sweep::Size(v) => increasing("sweep.size", v),
            Sweep::Elements(v) => increasing("sweep.elements", v),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Sweep::Point => 1,
            Sweep::Ports(v) | Sweep::Elements(v) => v.len(),
            Sweep::Size(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// System for every sweep point, in sweep order.
    pub fn systems(&self, base: &SystemConfig) -> Result<Vec<SystemConfig>> {
        let with_geometry = |n: usize, w: f64| -> Result<SystemConfig> {
            Ok(SystemConfig {
                geometry: PortGeometry::new(n, w)?,
                ..*base
            })
        };
        match self {
            Sweep::Point => Ok(vec![*base]),
            Sweep::Ports(v) => v
                .iter()
                .map(|&n| with_geometry(n, base.geometry.normalized_size()))
                .collect(),
            Sweep::Size(v) => v
                .iter()
                .map(|&w| with_geometry(base.geometry.num_ports(), w))
                .collect(),
            Sweep::Elements(v) => v
                .iter()
                .map(|&m| {
                    Ok(SystemConfig {
                        budget: base.budget.with_num_elements(m)?,
                        ..*base
                    })
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    #[serde(alias = "jsonl")]
    JsonLines,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub trials: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        SimulationSection {
            trials: DEFAULT_TRIALS,
            seed: 1,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MvnSection {
    pub points_per_replicate: usize,
    pub replicates: usize,
    pub target_error: Option<f64>,
    pub dimension_cap: usize,
}

impl Default for MvnSection {
    fn default() -> Self {
        MvnSection {
            points_per_replicate: DEFAULT_MVN_POINTS,
            replicates: DEFAULT_MVN_REPLICATES,
            target_error: None,
            dimension_cap: DEFAULT_MVN_DIMENSION_CAP,
        }
    }
}

/// On-disk experiment description. Every section is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub defaults: Defaults,
    pub sweep: Sweep,
    pub estimators: Vec<EstimatorKind>,
    pub threshold: ThresholdRule,
    pub simulation: SimulationSection,
    pub mvn: MvnSection,
    pub truncation: TruncationPolicy,
    pub record_timing: bool,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ConfigFile {
    fn default() -> Self {
        ConfigFile {
            defaults: Defaults::default(),
            sweep: Sweep::default(),
            estimators: EstimatorKind::ALL.to_vec(),
            threshold: ThresholdRule::Rate,
            simulation: SimulationSection::default(),
            mvn: MvnSection::default(),
            truncation: TruncationPolicy::default(),
            record_timing: true,
            output: None,
            format: OutputFormat::Csv,
        }
    }
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Config {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Validates every field and builds the resolved configuration.
    pub fn resolve(&self) -> Result<ExperimentConfig> {
        let d = &self.defaults;
        let (eps1, eps2) = d.gains();
        let geometry = PortGeometry::new(d.ports, d.size).map_err(|e| prefix("defaults", e))?;
        let budget = LinkBudget::new(d.elements, eps1, eps2).map_err(|e| prefix("defaults", e))?;
        let radio = RadioParams::new(d.transmit_power, d.noise_power, d.target_rate)
            .map_err(|e| prefix("defaults", e))?;
        if let ThresholdRule::Fixed(y) = self.threshold {
            if y.is_nan() || y < 0.0 {
                return Err(Error::invalid(
                    "threshold",
                    format!("must be nonnegative, got {y}"),
                ));
            }
        }
        let system = SystemConfig::new(geometry, budget, radio).with_threshold(self.threshold);

        self.sweep.validate()?;
        let mut estimators = self.estimators.clone();
        estimators.sort();
        estimators.dedup();
        if estimators.is_empty() {
            return Err(Error::invalid(
                "estimators",
                "at least one estimator is required",
            ));
        }

        let rule = match d.mass_fraction {
            Some(f) => BlockCountRule::MassFraction(f),
            None => {
                if d.eigen_threshold.is_nan() || d.eigen_threshold <= 0.0 {
                    return Err(Error::invalid(
                        "defaults.eigen_threshold",
                        "must be positive",
                    ));
                }
                BlockCountRule::EigenThreshold(d.eigen_threshold)
            }
        };
        let settings = EstimatorSettings {
            chebyshev_nodes: d.chebyshev_nodes,
            truncation: self.truncation,
            mvn: MvnSettings {
                points_per_replicate: self.mvn.points_per_replicate,
                replicates: self.mvn.replicates,
                seed: self.simulation.seed,
                target_error: self.mvn.target_error,
            },
            block: BlockSource::Fitted(rule),
            mu: d.mu,
        };
        settings.validate().map_err(|e| prefix("defaults", e))?;
        if self.mvn.replicates < 2 {
            return Err(Error::invalid(
                "mvn.replicates",
                "at least two replicates are needed",
            ));
        }
        if self.mvn.points_per_replicate == 0 {
            return Err(Error::invalid(
                "mvn.points_per_replicate",
                "must be positive",
            ));
        }
        if self.simulation.trials == 0 {
            return Err(Error::invalid("simulation.trials", "must be positive"));
        }
        if self.simulation.chunk_size == 0 {
            return Err(Error::invalid("simulation.chunk_size", "must be positive"));
        }

        Ok(ExperimentConfig {
            system,
            sweep: self.sweep.clone(),
            estimators,
            settings,
            simulation: self.simulation,
            mvn_dimension_cap: self.mvn.dimension_cap,
            record_timing: self.record_timing,
            output: self.output.clone(),
            format: self.format,
        })
    }
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { field, reason } => Error::InvalidParameter {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

/// Validated experiment ready to run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub sweep: Sweep,
    /// Sorted and deduplicated.
    pub estimators: Vec<EstimatorKind>,
    pub settings: EstimatorSettings,
    pub simulation: SimulationSection,
    pub mvn_dimension_cap: usize,
    pub record_timing: bool,
    pub output: Option<PathBuf>,
    pub format: OutputFormat,
}
