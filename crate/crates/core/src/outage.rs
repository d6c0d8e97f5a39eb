//! Outage threshold and the three analytical outage estimators.
//!
//! * `CLT`: the port gains are replaced by a Gaussian vector with mean
//!   `E_gamma`, covariance `V_gamma * Omega`, and the outage probability is
//!   its joint CDF at the threshold.
//! * `CLT_BC`: `Omega` is replaced by the block matrix `Omega_hat`, which
//!   decomposes every port gain into a shared term `w`, a per-block term
//!   `r_d` and a private term. Conditioning on `w` and `r_d` makes the ports
//!   independent, so the CDF becomes one outer quadrature over `w` wrapping
//!   `D` inner quadratures over `r_d`.
//! * `CLT_IID`: the `mu -> 1` limit where each block acts as a single port,
//!   leaving a single quadrature over the shared term.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::corr::{
    block_count, block_distance, build_sigma, eigen_spectrum, fit_block_sizes, BlockCountRule,
    BlockFit, BlockSpec, DEFAULT_MU,
};
use crate::error::{Error, Result};
use crate::moments::{build_omega, gamma_moments, EtaCoefficients, GammaMoments};
use crate::quad::{
    mvn_cdf, normal_cdf, ChebyshevRule, MvnProblem, TruncationPolicy, DEFAULT_CHEBYSHEV_NODES,
    DEFAULT_MVN_POINTS, DEFAULT_MVN_REPLICATES,
};
use crate::system::SystemConfig;

/// Transmit power and noise power in watts, target rate in bit/s/Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub transmit_power: f64,
    pub noise_power: f64,
    pub target_rate: f64,
}

impl RadioParams {
    pub fn new(transmit_power: f64, noise_power: f64, target_rate: f64) -> Result<Self> {
        for (field, v) in [
            ("transmit_power", transmit_power),
            ("noise_power", noise_power),
            ("target_rate", target_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    field,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(RadioParams {
            transmit_power,
            noise_power,
            target_rate,
        })
    }
}

/// `sqrt((2^R - 1) sigma^2 / P_S)`: the smallest selected-port gain that
/// still supports rate `R`.
pub fn outage_threshold(params: &RadioParams) -> f64 {
    ((params.target_rate.exp2() - 1.0) * params.noise_power / params.transmit_power).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EstimatorKind {
    #[serde(rename = "CLT")]
    Clt,
    #[serde(rename = "CLT_BC")]
    CltBc,
    #[serde(rename = "CLT_IID")]
    CltIid,
    #[serde(rename = "MONTE_CARLO")]
    MonteCarlo,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Clt,
        EstimatorKind::CltBc,
        EstimatorKind::CltIid,
        EstimatorKind::MonteCarlo,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Clt => "CLT",
            EstimatorKind::CltBc => "CLT_BC",
            EstimatorKind::CltIid => "CLT_IID",
            EstimatorKind::MonteCarlo => "MONTE_CARLO",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_uppercase().replace('-', "_");
        EstimatorKind::ALL
            .into_iter()
            .find(|k| {
                k.name() == normalized || (normalized == "MC" && *k == EstimatorKind::MonteCarlo)
            })
            .ok_or_else(|| Error::invalid("estimator", format!("unknown estimator {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageResult {
    pub estimator: EstimatorKind,
    /// Probability clamped to `[0, 1]`.
    pub probability: f64,
    /// Value before clamping.
    pub raw_probability: f64,
    pub clamped: bool,
    pub error_estimate: f64,
    pub wall_time: Duration,
}

impl OutageResult {
    pub fn new(
        estimator: EstimatorKind,
        raw: f64,
        error_estimate: f64,
        wall_time: Duration,
    ) -> Self {
        let probability = raw.clamp(0.0, 1.0);
        let clamped = probability != raw;
        if clamped {
            log::debug!("{estimator} estimate {raw:e} clamped to {probability}");
        }
        OutageResult {
            estimator,
            probability,
            raw_probability: raw,
            clamped,
            error_estimate,
            wall_time,
        }
    }
}

/// Where the block structure comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockSource {
    Fitted(BlockCountRule),
    Explicit(Vec<usize>),
}

impl Default for BlockSource {
    fn default() -> Self {
        BlockSource::Fitted(BlockCountRule::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MvnSettings {
    pub points_per_replicate: usize,
    pub replicates: usize,
    pub seed: u64,
    pub target_error: Option<f64>,
}

impl Default for MvnSettings {
    fn default() -> Self {
        MvnSettings {
            points_per_replicate: DEFAULT_MVN_POINTS,
            replicates: DEFAULT_MVN_REPLICATES,
            seed: 0,
            target_error: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSettings {
    pub chebyshev_nodes: usize,
    pub truncation: TruncationPolicy,
    pub mvn: MvnSettings,
    pub block: BlockSource,
    pub mu: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        EstimatorSettings {
            chebyshev_nodes: DEFAULT_CHEBYSHEV_NODES,
            truncation: TruncationPolicy::default(),
            mvn: MvnSettings::default(),
            block: BlockSource::default(),
            mu: DEFAULT_MU,
        }
    }
}

impl EstimatorSettings {
    pub fn validate(&self) -> Result<()> {
        if self.chebyshev_nodes == 0 {
            return Err(Error::invalid("chebyshev_nodes", "must be at least 1"));
        }
        crate::corr::validate_mu(self.mu)
    }
}

/// Block structure for the geometry according to `settings.block`.
pub fn block_structure(
    geometry: &crate::corr::PortGeometry,
    settings: &EstimatorSettings,
) -> Result<BlockFit> {
    let sigma = build_sigma(geometry)?;
    let spectrum = eigen_spectrum(&sigma)?;
    match &settings.block {
        BlockSource::Fitted(rule) => {
            let count = block_count(&spectrum, *rule)?;
            let mut fit = fit_block_sizes(&spectrum, count.count, settings.mu)?;
            if let BlockCountRule::EigenThreshold(t) = rule {
                fit.spec = fit.spec.with_eigen_threshold(*t);
            }
            Ok(fit)
        }
        BlockSource::Explicit(sizes) => {
            let total: usize = sizes.iter().sum();
            if total != geometry.num_ports() {
                return Err(Error::invalid(
                    "block_sizes",
                    format!(
                        "sizes sum to {total} but there are {} ports",
                        geometry.num_ports()
                    ),
                ));
            }
            let spec = BlockSpec::new(sizes.clone(), settings.mu)?;
            let distance = block_distance(sizes, settings.mu, &spectrum);
            Ok(BlockFit { spec, distance })
        }
    }
}

/// Joint Gaussian CDF `P(max_k gamma_k <= y)` of the CLT surrogate.
pub fn clt_cdf(
    y: f64,
    omega: &crate::corr::CorrelationMatrix,
    moments: &GammaMoments,
    mvn: &MvnSettings,
) -> Result<crate::quad::MvnEstimate> {
    let n = omega.order();
    let covariance = omega.entries() * moments.variance;
    let mut problem = MvnProblem::new(y, vec![moments.mean; n], covariance)
        .with_seed(mvn.seed)
        .with_budget(mvn.points_per_replicate);
    problem.replicates = mvn.replicates;
    problem.target_error = mvn.target_error;
    mvn_cdf(&problem)
}

/// CDF of a port gain given its block term `x_d` and the shared term `x_0`,
/// both centered: `Phi((y - x_d - x_0 - E) / sqrt(V (1 - rho1)))`.
pub fn block_conditional_cdf(
    y: f64,
    x_d: f64,
    x_0: f64,
    moments: &GammaMoments,
    rho0: f64,
    rho1: f64,
) -> f64 {
    debug_assert!(rho0 < rho1 && rho1 < 1.0);
    let sd = (moments.variance * (1.0 - rho1)).sqrt();
    normal_cdf((y - x_d - x_0 - moments.mean) / sd)
}

/// Nested-quadrature CDF of the block-correlation surrogate.
pub fn clt_bc_cdf(
    y: f64,
    block_sizes: &[usize],
    rho: EtaCoefficients,
    moments: &GammaMoments,
    rule: &ChebyshevRule,
    truncation: &TruncationPolicy,
) -> Result<f64> {
    let EtaCoefficients { rho0, rho1 } = rho;
    if !(rho0 >= 0.0 && rho0 < rho1 && rho1 < 1.0) {
        return Err(Error::DegenerateBlockCorrelation { rho0, rho1 });
    }
    if block_sizes.is_empty() || block_sizes.contains(&0) {
        return Err(Error::invalid("block_sizes", "blocks must be non-empty"));
    }
    let v = moments.variance;
    let sd_private = (v * (1.0 - rho1)).sqrt();
    let sd_block = (v * (rho1 - rho0)).sqrt();
    let sd_shared = (v * rho0).sqrt();

    // mean E is carried by the shared term; the block terms are centered
    let outer = gaussian_nodes(rule, truncation, moments.mean, sd_shared)?;
    let inner = gaussian_nodes(rule, truncation, 0.0, sd_block)?;

    let centered = y - moments.mean;
    let mut base = vec![0.0; inner.len()];
    let mut total = 0.0;
    for &(x0, w0) in &outer {
        for (b, &(xd, _)) in base.iter_mut().zip(&inner) {
            *b = normal_cdf((centered - xd - x0) / sd_private);
        }
        let mut product = 1.0;
        for &size in block_sizes {
            let block: f64 = base
                .iter()
                .zip(&inner)
                .map(|(&b, &(_, wd))| wd * b.powi(size as i32))
                .sum();
            product *= block;
            if product == 0.0 {
                break;
            }
        }
        total += w0 * product;
    }
    Ok(total)
}

/// Quadrature nodes and density-weighted weights for a centered Gaussian
/// variable of standard deviation `sd` whose uncentered mean is `mean`.
fn gaussian_nodes(
    rule: &ChebyshevRule,
    truncation: &TruncationPolicy,
    mean: f64,
    sd: f64,
) -> Result<Vec<(f64, f64)>> {
    let window = truncation.centered_window(mean, sd)?;
    Ok(rule
        .mapped(&window)
        .map(|(x, w)| (x, w * crate::quad::normal_pdf(x / sd) / sd))
        .collect())
}

/// CDF of the i.i.d.-blocks limit: `D` ports sharing only the common term.
pub fn clt_iid_cdf(
    y: f64,
    num_blocks: usize,
    rho0: f64,
    moments: &GammaMoments,
    rule: &ChebyshevRule,
    truncation: &TruncationPolicy,
) -> Result<f64> {
    if num_blocks == 0 {
        return Err(Error::invalid("num_blocks", "must be at least 1"));
    }
    if !(0.0..1.0).contains(&rho0) {
        return Err(Error::invalid(
            "rho0",
            format!("must lie in [0, 1), got {rho0}"),
        ));
    }
    let v = moments.variance;
    let sd_private = (v * (1.0 - rho0)).sqrt();
    if rho0 == 0.0 {
        return Ok(normal_cdf((y - moments.mean) / sd_private).powi(num_blocks as i32));
    }
    // shared draw b0 ~ N(0, V) enters every port as sqrt(rho0) * b0
    let sd_b0 = v.sqrt();
    let scale = rho0.sqrt();
    let nodes = gaussian_nodes(rule, truncation, 0.0, sd_b0)?;
    Ok(nodes
        .iter()
        .map(|&(b0, w)| {
            w * normal_cdf((y - moments.mean - scale * b0) / sd_private).powi(num_blocks as i32)
        })
        .sum())
}

fn half_rule(rule: &ChebyshevRule) -> Result<ChebyshevRule> {
    ChebyshevRule::new(rule.num_nodes().div_ceil(2))
}

/// Outage probability under the full CLT surrogate.
pub fn outage_clt(system: &SystemConfig, settings: &EstimatorSettings) -> Result<OutageResult> {
    let start = Instant::now();
    let sigma = build_sigma(&system.geometry)?;
    let omega = build_omega(&sigma)?;
    let moments = gamma_moments(&system.budget);
    let est = clt_cdf(system.threshold(), &omega, &moments, &settings.mvn)?;
    Ok(OutageResult::new(
        EstimatorKind::Clt,
        est.value,
        est.error_estimate,
        start.elapsed(),
    ))
}

/// Outage probability under the block-correlation surrogate. The error
/// estimate is the change against a rule with half as many nodes.
pub fn outage_clt_bc(system: &SystemConfig, settings: &EstimatorSettings) -> Result<OutageResult> {
    settings.validate()?;
    let start = Instant::now();
    let fit = block_structure(&system.geometry, settings)?;
    let rho = EtaCoefficients::from_mu(settings.mu)?;
    let moments = gamma_moments(&system.budget);
    let rule = ChebyshevRule::new(settings.chebyshev_nodes)?;
    let y = system.threshold();
    let sizes = fit.spec.block_sizes();
    let value = clt_bc_cdf(y, sizes, rho, &moments, &rule, &settings.truncation)?;
    let elapsed = start.elapsed();
    let coarse = clt_bc_cdf(
        y,
        sizes,
        rho,
        &moments,
        &half_rule(&rule)?,
        &settings.truncation,
    )?;
    Ok(OutageResult::new(
        EstimatorKind::CltBc,
        value,
        (value - coarse).abs(),
        elapsed,
    ))
}

/// Outage probability of the i.i.d.-blocks limit, with `D` taken from the
/// block structure.
pub fn outage_clt_iid(system: &SystemConfig, settings: &EstimatorSettings) -> Result<OutageResult> {
    settings.validate()?;
    let start = Instant::now();
    let fit = block_structure(&system.geometry, settings)?;
    let rho0 = crate::moments::eta(0.0);
    let moments = gamma_moments(&system.budget);
    let rule = ChebyshevRule::new(settings.chebyshev_nodes)?;
    let y = system.threshold();
    let d = fit.spec.num_blocks();
    let value = clt_iid_cdf(y, d, rho0, &moments, &rule, &settings.truncation)?;
    let elapsed = start.elapsed();
    let coarse = clt_iid_cdf(
        y,
        d,
        rho0,
        &moments,
        &half_rule(&rule)?,
        &settings.truncation,
    )?;
    Ok(OutageResult::new(
        EstimatorKind::CltIid,
        value,
        (value - coarse).abs(),
        elapsed,
    ))
}
