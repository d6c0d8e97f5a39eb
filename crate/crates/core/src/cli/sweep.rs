use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::cli::config::ExperimentConfig;
use crate::error::Result;
use crate::outage::{outage_clt, outage_clt_bc, outage_clt_iid, EstimatorKind, OutageResult};
use crate::sim::{empirical_outage, SimPlan};
use crate::system::SystemConfig;

/// Text written in place of a probability when the full multivariate CDF
/// is not attempted because the port count exceeds the configured cap.
pub const SKIPPED_DIMENSION: &str = "skipped: dimension";

/// Probability cell: a number, or a marker explaining why it is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Probability {
    Value(f64),
    Skipped(String),
}

impl Probability {
    pub fn value(&self) -> Option<f64> {
        match self {
            Probability::Value(p) => Some(*p),
            Probability::Skipped(_) => None,
        }
    }
}

/// One estimator evaluated at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub estimator: EstimatorKind,
    #[serde(rename = "M")]
    pub elements: usize,
    #[serde(rename = "N")]
    pub ports: usize,
    #[serde(rename = "W")]
    pub size: f64,
    #[serde(rename = "R")]
    pub target_rate: f64,
    #[serde(rename = "P_S")]
    pub transmit_power: f64,
    #[serde(rename = "sigma2")]
    pub noise_power: f64,
    pub threshold: f64,
    pub probability: Probability,
    pub error_estimate: Option<f64>,
    pub wall_time_ms: f64,
    pub seed: u64,
}

impl ResultRow {
    fn new(system: &SystemConfig, estimator: EstimatorKind, seed: u64) -> Self {
        ResultRow {
            estimator,
            elements: system.budget.num_elements(),
            ports: system.geometry.num_ports(),
            size: system.geometry.normalized_size(),
            target_rate: system.radio.target_rate,
            transmit_power: system.radio.transmit_power,
            noise_power: system.radio.noise_power,
            threshold: system.threshold(),
            probability: Probability::Skipped(String::new()),
            error_estimate: None,
            wall_time_ms: 0.0,
            seed,
        }
    }
}

/// Evaluates every requested estimator at every sweep point.
///
/// Rows come out grouped by estimator, then in sweep order. Every point uses
/// the same seed so neighbouring points share random numbers.
pub fn run_sweep(config: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let systems = config.sweep.systems(&config.system)?;
    let seed = config.simulation.seed;
    let mut rows = Vec::with_capacity(systems.len() * config.estimators.len());
    for &kind in &config.estimators {
        for system in &systems {
            let mut row = ResultRow::new(system, kind, seed);
            if kind == EstimatorKind::Clt && system.geometry.num_ports() > config.mvn_dimension_cap
            {
                log::info!(
                    "skipping {kind} at N={} (cap {})",
                    system.geometry.num_ports(),
                    config.mvn_dimension_cap
                );
                row.probability = Probability::Skipped(SKIPPED_DIMENSION.to_string());
                rows.push(row);
                continue;
            }
            let (probability, error, elapsed) = evaluate(kind, system, config)?;
            row.probability = Probability::Value(probability);
            row.error_estimate = Some(error);
            if config.record_timing {
                row.wall_time_ms = elapsed.as_secs_f64() * 1e3;
            }
            log::debug!("{kind} N={} M={}: {probability:e}", row.ports, row.elements);
            rows.push(row);
        }
    }
    Ok(rows)
}

fn evaluate(
    kind: EstimatorKind,
    system: &SystemConfig,
    config: &ExperimentConfig,
) -> Result<(f64, f64, Duration)> {
    let settings = &config.settings;
    let analytic = |r: OutageResult| (r.probability, r.error_estimate, r.wall_time);
    Ok(match kind {
        EstimatorKind::Clt => analytic(outage_clt(system, settings)?),
        EstimatorKind::CltBc => analytic(outage_clt_bc(system, settings)?),
        EstimatorKind::CltIid => analytic(outage_clt_iid(system, settings)?),
        EstimatorKind::MonteCarlo => {
            let start = std::time::Instant::now();
            let plan = SimPlan {
                chunk_size: config.simulation.chunk_size,
                ..SimPlan::new(*system, config.simulation.trials, config.simulation.seed)
            };
            let est = empirical_outage(&plan)?;
            (
                est.outage_probability,
                est.error_estimate(),
                start.elapsed(),
            )
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::config::{ConfigFile, Sweep};

    fn quick_config(sweep: Sweep, estimators: Vec<EstimatorKind>) -> ExperimentConfig {
        let mut file = ConfigFile {
            sweep,
            estimators,
            record_timing: false,
            ..ConfigFile::default()
        };
        file.simulation.trials = 2000;
        file.mvn.points_per_replicate = 256;
        file.resolve().unwrap()
    }

    #[test]
    fn rows_are_grouped_by_estimator_then_point() {
        let cfg = quick_config(
            Sweep::Ports(vec![4, 8]),
            vec![EstimatorKind::CltIid, EstimatorKind::CltBc],
        );
        let rows = run_sweep(&cfg).unwrap();
        let order: Vec<_> = rows.iter().map(|r| (r.estimator, r.ports)).collect();
        assert_eq!(
            order,
            vec![
                (EstimatorKind::CltBc, 4),
                (EstimatorKind::CltBc, 8),
                (EstimatorKind::CltIid, 4),
                (EstimatorKind::CltIid, 8),
            ]
        );
        assert!(rows.iter().all(|r| r.wall_time_ms == 0.0));
    }

    #[test]
    fn large_dimension_is_skipped_for_full_cdf() {
        let mut cfg = quick_config(Sweep::Ports(vec![3, 6]), vec![EstimatorKind::Clt]);
        cfg.mvn_dimension_cap = 4;
        let rows = run_sweep(&cfg).unwrap();
        assert!(rows[0].probability.value().is_some());
        assert_eq!(
            rows[1].probability,
            Probability::Skipped(SKIPPED_DIMENSION.to_string())
        );
        assert_eq!(rows[1].error_estimate, None);
    }
}
