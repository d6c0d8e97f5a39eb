//! Spatial port correlation of the fluid-antenna receiver and its
//! block-correlation approximation.
//!
//! Ports sit on a uniform grid across an aperture of `W` wavelengths and are
//! correlated through the 3D Clarke (sinc) kernel, which makes the
//! correlation matrix a symmetric Toeplitz matrix. The block model replaces
//! it with `D` equicorrelated diagonal blocks whose sizes are fitted to the
//! principal part of the eigen-spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default eigenvalue threshold used to count principal eigenvalues.
pub const DEFAULT_EIGEN_THRESHOLD: f64 = 0.1;
/// Default intra-block correlation of the block model.
pub const DEFAULT_MU: f64 = 0.9;
/// Default captured-mass fraction for [`BlockCountRule::MassFraction`].
pub const DEFAULT_MASS_FRACTION: f64 = 0.95;

const EIGEN_MAX_ITERATIONS_PER_ORDER: usize = 1000;

/// Number of ports and normalized aperture of the receiver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortGeometry {
    num_ports: usize,
    normalized_size: f64,
}

impl PortGeometry {
    pub fn new(num_ports: usize, normalized_size: f64) -> Result<Self> {
        if num_ports == 0 {
            return Err(Error::invalid("num_ports", "at least one port is required"));
        }
        if !(normalized_size > 0.0 && normalized_size.is_finite()) {
            return Err(Error::invalid(
                "normalized_size",
                format!("must be a positive finite number, got {normalized_size}"),
            ));
        }
        Ok(PortGeometry {
            num_ports,
            normalized_size,
        })
    }

    pub fn num_ports(&self) -> usize {
        self.num_ports
    }

    pub fn normalized_size(&self) -> f64 {
        self.normalized_size
    }
}

/// `sin(pi x)` with exact zeros at the integers.
fn sin_pi(x: f64) -> f64 {
    let r = x.rem_euclid(2.0);
    let (sign, r) = if r >= 1.0 { (-1.0, r - 1.0) } else { (1.0, r) };
    let r = if r > 0.5 { 1.0 - r } else { r };
    sign * (PI * r).sin()
}

/// `sin(pi x) / (pi x)`.
fn sinc_pi(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else if x.fract() == 0.0 {
        0.0
    } else {
        sin_pi(x) / (PI * x)
    }
}

/// Correlation between two ports `delta` grid steps apart:
/// `sinc(2 pi delta W / (N - 1))`, and 1 for a single-port receiver.
pub fn port_correlation(delta: i64, geometry: &PortGeometry) -> f64 {
    let n = geometry.num_ports;
    debug_assert!(delta.unsigned_abs() as usize <= n.saturating_sub(1));
    if n == 1 || delta == 0 {
        return 1.0;
    }
    sinc_pi(2.0 * delta.unsigned_abs() as f64 * geometry.normalized_size / (n - 1) as f64)
}

/// Symmetric, unit-diagonal correlation matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    entries: DMatrix<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, the unit diagonal and the entry range.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || entries.ncols() != n {
            return Err(Error::invalid(
                "correlation_matrix",
                format!(
                    "expected a non-empty square matrix, got {}x{}",
                    n,
                    entries.ncols()
                ),
            ));
        }
        for i in 0..n {
            if entries[(i, i)] != 1.0 {
                return Err(Error::invalid(
                    "correlation_matrix",
                    format!("diagonal entry {i} is {} instead of 1", entries[(i, i)]),
                ));
            }
            for j in 0..i {
                let (a, b) = (entries[(i, j)], entries[(j, i)]);
                if !a.is_finite() || a.abs() > 1.0 {
                    return Err(Error::invalid(
                        "correlation_matrix",
                        format!("entry ({i}, {j}) = {a} is outside [-1, 1]"),
                    ));
                }
                if (a - b).abs() > 1e-12 {
                    return Err(Error::invalid(
                        "correlation_matrix",
                        format!("not symmetric at ({i}, {j}): {a} vs {b}"),
                    ));
                }
            }
        }
        Ok(CorrelationMatrix { entries })
    }

    /// Symmetric Toeplitz matrix with the given first row.
    pub fn toeplitz(first_row: &[f64]) -> Result<Self> {
        let n = first_row.len();
        Self::new(DMatrix::from_fn(n, n, |i, j| first_row[i.abs_diff(j)]))
    }

    pub fn order(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[(row, col)]
    }

    /// Default PSD tolerance, `1e-10 * order`.
    pub fn default_psd_tolerance(&self) -> f64 {
        1e-10 * self.order() as f64
    }

    /// Smallest eigenvalue, or [`Error::NotPsd`] when it is below `-tolerance`.
    pub fn check_psd(&self, tolerance: f64) -> Result<f64> {
        let spectrum = eigen_spectrum(self)?;
        let min = spectrum.values.last().copied().unwrap_or(0.0);
        if min < -tolerance {
            return Err(Error::NotPsd {
                min_eigenvalue: min,
                tolerance,
            });
        }
        Ok(min)
    }

    /// Clips negative eigenvalues to zero, re-symmetrizes and rescales back
    /// to a unit diagonal.
    pub fn repair_psd(&self) -> Result<CorrelationMatrix> {
        let repaired = clip_negative_eigenvalues(&self.entries)?;
        let n = repaired.nrows();
        let scale: Vec<f64> = (0..n)
            .map(|i| {
                let d = repaired[(i, i)];
                if d > 0.0 {
                    1.0 / d.sqrt()
                } else {
                    0.0
                }
            })
            .collect();
        let entries = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                1.0
            } else {
                (repaired[(i, j)] * scale[i] * scale[j]).clamp(-1.0, 1.0)
            }
        });
        CorrelationMatrix::new(entries)
    }
}

/// Clips negative eigenvalues of a symmetric matrix and re-symmetrizes.
pub fn clip_negative_eigenvalues(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = matrix.nrows();
    let eig = SymmetricEigen::try_new(
        matrix.clone(),
        f64::EPSILON,
        EIGEN_MAX_ITERATIONS_PER_ORDER * n.max(1),
    )
    .ok_or(Error::EigenNoConvergence {
        order: n,
        max_iterations: EIGEN_MAX_ITERATIONS_PER_ORDER * n.max(1),
    })?;
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    Ok((&rebuilt + rebuilt.transpose()) * 0.5)
}

/// Toeplitz port-correlation matrix of the geometry.
pub fn build_sigma(geometry: &PortGeometry) -> Result<CorrelationMatrix> {
    let first_row: Vec<f64> = (0..geometry.num_ports as i64)
        .map(|delta| port_correlation(delta, geometry))
        .collect();
    let sigma = CorrelationMatrix::toeplitz(&first_row)?;
    sigma.check_psd(sigma.default_psd_tolerance())?;
    Ok(sigma)
}

/// Eigenvalues sorted in descending order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub values: Vec<f64>,
    pub total_mass: f64,
}

impl EigenSpectrum {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let total_mass = values.iter().sum();
        EigenSpectrum { values, total_mass }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

pub fn eigen_spectrum(matrix: &CorrelationMatrix) -> Result<EigenSpectrum> {
    let n = matrix.order();
    let max_iterations = EIGEN_MAX_ITERATIONS_PER_ORDER * n;
    let eig = SymmetricEigen::try_new(matrix.entries.clone(), f64::EPSILON, max_iterations).ok_or(
        Error::EigenNoConvergence {
            order: n,
            max_iterations,
        },
    )?;
    Ok(EigenSpectrum::from_values(
        eig.eigenvalues.iter().copied().collect(),
    ))
}

/// How the number of blocks is derived from the eigen-spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockCountRule {
    /// Count eigenvalues at or above the threshold.
    EigenThreshold(f64),
    /// Smallest count whose leading eigenvalues capture the given fraction
    /// of the total mass.
    MassFraction(f64),
}

impl Default for BlockCountRule {
    fn default() -> Self {
        BlockCountRule::EigenThreshold(DEFAULT_EIGEN_THRESHOLD)
    }
}

/// Chosen block count. `below_threshold` is set when no eigenvalue reached
/// the threshold and the count was clamped up to one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockCount {
    pub count: usize,
    pub below_threshold: bool,
}

pub fn select_block_count(spectrum: &EigenSpectrum, eigen_threshold: f64) -> Result<BlockCount> {
    if eigen_threshold.is_nan() || eigen_threshold <= 0.0 {
        return Err(Error::invalid(
            "eigen_threshold",
            format!("must be positive, got {eigen_threshold}"),
        ));
    }
    let n = spectrum.len().max(1);
    let above = spectrum
        .values
        .iter()
        .filter(|&&v| v >= eigen_threshold)
        .count();
    if above == 0 {
        log::warn!(
            "eigen threshold {eigen_threshold} exceeds every eigenvalue; using a single block"
        );
    }
    Ok(BlockCount {
        count: above.clamp(1, n),
        below_threshold: above == 0,
    })
}

pub fn select_block_count_by_mass(spectrum: &EigenSpectrum, fraction: f64) -> Result<BlockCount> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(
            "mass_fraction",
            format!("must lie in (0, 1], got {fraction}"),
        ));
    }
    let target = fraction * spectrum.len() as f64;
    let mut captured = 0.0;
    let mut count = spectrum.len();
    for (i, v) in spectrum.values.iter().enumerate() {
        captured += v;
        // small slack so that a full-mass request on an exact spectrum succeeds
        if captured >= target * (1.0 - 1e-12) {
            count = i + 1;
            break;
        }
    }
    Ok(BlockCount {
        count: count.max(1),
        below_threshold: false,
    })
}

pub fn block_count(spectrum: &EigenSpectrum, rule: BlockCountRule) -> Result<BlockCount> {
    match rule {
        BlockCountRule::EigenThreshold(t) => select_block_count(spectrum, t),
        BlockCountRule::MassFraction(f) => select_block_count_by_mass(spectrum, f),
    }
}

/// Block structure of the approximating matrix: `D` equicorrelated blocks
/// of sizes `L_d` with off-diagonal value `mu` inside each block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    block_sizes: Vec<usize>,
    intra_block_mu: f64,
    eigen_threshold: Option<f64>,
}

pub(crate) fn validate_mu(mu: f64) -> Result<()> {
    if mu > 0.0 && mu < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "mu",
            format!("must lie strictly inside (0, 1), got {mu}"),
        ))
    }
}

impl BlockSpec {
    pub fn new(block_sizes: Vec<usize>, intra_block_mu: f64) -> Result<Self> {
        if block_sizes.is_empty() {
            return Err(Error::invalid(
                "block_sizes",
                "at least one block is required",
            ));
        }
        if block_sizes.contains(&0) {
            return Err(Error::invalid(
                "block_sizes",
                "every block needs at least one port",
            ));
        }
        validate_mu(intra_block_mu)?;
        Ok(BlockSpec {
            block_sizes,
            intra_block_mu,
            eigen_threshold: None,
        })
    }

    pub fn with_eigen_threshold(mut self, threshold: f64) -> Self {
        self.eigen_threshold = Some(threshold);
        self
    }

    pub fn num_blocks(&self) -> usize {
        self.block_sizes.len()
    }

    pub fn block_sizes(&self) -> &[usize] {
        &self.block_sizes
    }

    pub fn num_ports(&self) -> usize {
        self.block_sizes.iter().sum()
    }

    pub fn intra_block_mu(&self) -> f64 {
        self.intra_block_mu
    }

    pub fn eigen_threshold(&self) -> Option<f64> {
        self.eigen_threshold
    }
}

/// Closed-form spectrum of the block model: each block of size `L`
/// contributes `1 + (L - 1) mu` once and `1 - mu` with multiplicity `L - 1`.
pub fn block_model_spectrum(spec: &BlockSpec) -> EigenSpectrum {
    block_sizes_spectrum(&spec.block_sizes, spec.intra_block_mu)
}

fn block_sizes_spectrum(sizes: &[usize], mu: f64) -> EigenSpectrum {
    let mut values = Vec::with_capacity(sizes.iter().sum());
    for &l in sizes {
        values.push(1.0 + (l - 1) as f64 * mu);
        values.extend(std::iter::repeat_n(1.0 - mu, l - 1));
    }
    EigenSpectrum::from_values(values)
}

/// Sum of squared differences between the sorted spectra of the block model
/// and the target.
pub fn block_distance(sizes: &[usize], mu: f64, target: &EigenSpectrum) -> f64 {
    let model = block_sizes_spectrum(sizes, mu);
    model
        .values
        .iter()
        .zip(&target.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Fitted block structure with its achieved eigenvalue distance.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockFit {
    pub spec: BlockSpec,
    pub distance: f64,
}

/// Chooses block sizes summing to `N = spectrum.len()`.
///
/// Sizes are set sequentially so that the `d`-th block's leading eigenvalue
/// `1 + (L_d - 1) mu` tracks the `d`-th principal eigenvalue, with the last
/// block absorbing the remainder. A refinement pass then moves ports between
/// blocks while the eigenvalue distance strictly decreases.
pub fn fit_block_sizes(spectrum: &EigenSpectrum, num_blocks: usize, mu: f64) -> Result<BlockFit> {
    let n = spectrum.len();
    if num_blocks == 0 || num_blocks > n {
        return Err(Error::InfeasibleBlocks {
            ports: n,
            blocks: num_blocks,
        });
    }
    validate_mu(mu)?;

    let mut sizes = Vec::with_capacity(num_blocks);
    let mut remaining = n;
    for d in 0..num_blocks - 1 {
        let wanted = ((spectrum.values[d] - 1.0) / mu).round() + 1.0;
        let cap = remaining - (num_blocks - 1 - d);
        let size = if wanted.is_finite() {
            (wanted.max(1.0) as usize).min(cap)
        } else {
            1
        };
        sizes.push(size);
        remaining -= size;
    }
    sizes.push(remaining);

    let distance = refine_block_sizes(&mut sizes, mu, spectrum);
    Ok(BlockFit {
        spec: BlockSpec::new(sizes, mu)?,
        distance,
    })
}

/// Steepest-descent over single-port moves between any two blocks.
fn refine_block_sizes(sizes: &mut [usize], mu: f64, target: &EigenSpectrum) -> f64 {
    let mut best = block_distance(sizes, mu, target);
    loop {
        let mut best_move = None;
        for from in 0..sizes.len() {
            if sizes[from] == 1 {
                continue;
            }
            for to in 0..sizes.len() {
                if to == from {
                    continue;
                }
                sizes[from] -= 1;
                sizes[to] += 1;
                let d = block_distance(sizes, mu, target);
                sizes[from] += 1;
                sizes[to] -= 1;
                if d < best {
                    best = d;
                    best_move = Some((from, to));
                }
            }
        }
        match best_move {
            Some((from, to)) => {
                sizes[from] -= 1;
                sizes[to] += 1;
            }
            None => return best,
        }
    }
}
