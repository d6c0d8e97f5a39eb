//! CLT surrogate moments of the per-port combined channel
//! `gamma_k = sum_m |h_m| |v_{m,k}|` and the mapping from port correlations
//! to combined-channel correlations.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::corr::{validate_mu, BlockSpec, CorrelationMatrix};
use crate::error::{Error, Result};

/// `pi^2 / 16`, the squared mean of a unit-power Rayleigh product.
pub const PI2_OVER_16: f64 = PI * PI / 16.0;

const HYPERGEOMETRIC_REL_TOL: f64 = 1e-14;
const HYPERGEOMETRIC_MAX_TERMS: usize = 1_000_000;

/// RIS size and average gains of the two hops.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    num_elements: usize,
    gain_bs_ris: f64,
    gain_ris_user: f64,
}

impl LinkBudget {
    pub fn new(num_elements: usize, gain_bs_ris: f64, gain_ris_user: f64) -> Result<Self> {
        if num_elements == 0 {
            return Err(Error::invalid(
                "num_elements",
                "the RIS needs at least one element",
            ));
        }
        for (field, v) in [
            ("gain_bs_ris", gain_bs_ris),
            ("gain_ris_user", gain_ris_user),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(
                    field,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(LinkBudget {
            num_elements,
            gain_bs_ris,
            gain_ris_user,
        })
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn gain_bs_ris(&self) -> f64 {
        self.gain_bs_ris
    }

    pub fn gain_ris_user(&self) -> f64 {
        self.gain_ris_user
    }

    pub fn with_num_elements(self, num_elements: usize) -> Result<Self> {
        Self::new(num_elements, self.gain_bs_ris, self.gain_ris_user)
    }
}

/// Mean and variance of the Gaussian surrogate of `gamma_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaMoments {
    pub mean: f64,
    pub variance: f64,
}

impl GammaMoments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

pub fn gamma_moments(budget: &LinkBudget) -> GammaMoments {
    let m = budget.num_elements as f64;
    let product = budget.gain_bs_ris * budget.gain_ris_user;
    GammaMoments {
        mean: m * PI * product.sqrt() / 4.0,
        variance: m * product * (1.0 - PI2_OVER_16),
    }
}

/// `2F1(-1/2, -1/2; 1; z)` for `z` in `[0, 1]` by its power series.
///
/// The coefficients are positive and decay like `n^-3`, so the partial sums
/// increase monotonically towards the limit; at `z = 1` the Gauss sum gives
/// `4 / pi` exactly.
pub fn hyp2f1_neg_half(z: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&z));
    if z >= 1.0 {
        return 4.0 / PI;
    }
    let mut sum = 1.0;
    let mut term = 1.0;
    for n in 0..HYPERGEOMETRIC_MAX_TERMS {
        let k = n as f64;
        let a = k - 0.5;
        term *= a * a / ((k + 1.0) * (k + 1.0)) * z;
        sum += term;
        if term < HYPERGEOMETRIC_REL_TOL * sum {
            break;
        }
    }
    sum
}

/// `E(|v_k| |v_l|)` for two zero-mean complex Gaussians of power `gain`
/// whose correlation coefficient is `g`.
///
/// The envelope pair follows the bivariate Rayleigh law with power
/// correlation `g^2`, giving `(pi gain / 4) 2F1(-1/2, -1/2; 1; g^2)`.
pub fn envelope_cross_moment(g: f64, gain: f64) -> f64 {
    let z = (g * g).min(1.0);
    if z >= 1.0 {
        return gain;
    }
    PI * gain / 4.0 * hyp2f1_neg_half(z)
}

/// Correlation coefficient between `gamma_k` and `gamma_l` for ports with
/// correlation `g`. Independent of `M` and both gains.
pub fn eta(g: f64) -> f64 {
    if g.abs() >= 1.0 {
        return 1.0;
    }
    (envelope_cross_moment(g, 1.0) - PI2_OVER_16) / (1.0 - PI2_OVER_16)
}

/// Pearson correlation of `gamma_k`, `gamma_l` from the unnormalized moments
/// of a particular link budget; algebraically equal to [`eta`].
pub fn pearson_gamma_correlation(g: f64, budget: &LinkBudget) -> f64 {
    let moments = gamma_moments(budget);
    let m = budget.num_elements as f64;
    let cross = envelope_cross_moment(g, budget.gain_ris_user);
    (m * budget.gain_bs_ris * cross - moments.mean * moments.mean / m) / moments.variance
}

/// Correlations of the block model: `rho0 = eta(0)` between blocks and
/// `rho1 = eta(mu)` inside a block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaCoefficients {
    pub rho0: f64,
    pub rho1: f64,
}

impl EtaCoefficients {
    pub fn from_mu(mu: f64) -> Result<Self> {
        validate_mu(mu)?;
        Ok(EtaCoefficients {
            rho0: eta(0.0),
            rho1: eta(mu),
        })
    }
}

/// Entrywise `eta` of a port-correlation matrix.
///
/// `eta` is a power series in `g^2` with nonnegative coefficients, so the
/// result is a nonnegative combination of Hadamard powers of `sigma` and is
/// PSD whenever `sigma` is. A numerically indefinite result is still repaired.
pub fn build_omega(sigma: &CorrelationMatrix) -> Result<CorrelationMatrix> {
    let n = sigma.order();
    let mut entries = DMatrix::from_element(n, n, 1.0);
    for i in 0..n {
        for j in 0..i {
            let v = eta(sigma.get(i, j));
            entries[(i, j)] = v;
            entries[(j, i)] = v;
        }
    }
    let omega = CorrelationMatrix::new(entries)?;
    match omega.check_psd(omega.default_psd_tolerance()) {
        Ok(_) => Ok(omega),
        Err(Error::NotPsd { min_eigenvalue, .. }) => {
            log::warn!("combined-channel correlation matrix is indefinite (min eigenvalue {min_eigenvalue:e}); repairing");
            omega.repair_psd()
        }
        Err(e) => Err(e),
    }
}

/// Block correlation matrix of the surrogate channel: `rho1` inside each
/// diagonal block, `rho0` everywhere else off the diagonal.
pub fn build_omega_hat(spec: &BlockSpec) -> Result<CorrelationMatrix> {
    let eta = EtaCoefficients::from_mu(spec.intra_block_mu())?;
    let labels: Vec<usize> = spec
        .block_sizes()
        .iter()
        .enumerate()
        .flat_map(|(d, &l)| std::iter::repeat_n(d, l))
        .collect();
    let n = labels.len();
    CorrelationMatrix::new(DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            1.0
        } else if labels[i] == labels[j] {
            eta.rho1
        } else {
            eta.rho0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corr::{build_sigma, PortGeometry};
    use approx::assert_abs_diff_eq;

    #[test]
    fn moments_at_reference_budget() {
        let b = LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap();
        let m = gamma_moments(&b);
        assert_abs_diff_eq!(m.mean, 40.0 * PI * 2.5e-5 / 4.0, epsilon = 1e-18);
        assert_abs_diff_eq!(m.mean, 7.85398e-4, epsilon = 1e-9);
        assert_abs_diff_eq!(m.variance, 9.5788e-9, epsilon = 1e-13);
    }

    #[test]
    fn moments_single_term() {
        let m = gamma_moments(&LinkBudget::new(1, 1.0, 1.0).unwrap());
        assert_eq!(m.mean, PI / 4.0);
        assert_eq!(m.variance, 1.0 - PI2_OVER_16);
    }

    #[test]
    fn budget_validation() {
        assert!(LinkBudget::new(0, 1.0, 1.0).is_err());
        assert!(LinkBudget::new(1, 0.0, 1.0).is_err());
        assert!(LinkBudget::new(1, 1.0, -2.0).is_err());
    }

    #[test]
    fn cross_moment_anchors() {
        assert_abs_diff_eq!(envelope_cross_moment(0.0, 1.0), PI / 4.0, epsilon = 1e-15);
        assert_eq!(envelope_cross_moment(1.0, 1.0), 1.0);
        assert_eq!(envelope_cross_moment(-1.0, 3.0), 3.0);
        assert_abs_diff_eq!(envelope_cross_moment(0.5, 1.0), 0.8353, epsilon = 5e-5);
    }

    #[test]
    fn series_approaches_endpoint() {
        let near = hyp2f1_neg_half(1.0 - 1e-9);
        assert!(near < 4.0 / PI);
        assert_abs_diff_eq!(near, 4.0 / PI, epsilon = 1e-7);
    }

    #[test]
    fn eta_anchors() {
        assert_eq!(eta(1.0), 1.0);
        assert_abs_diff_eq!(eta(0.0), PI / (4.0 + PI), epsilon = 1e-15);
        assert_abs_diff_eq!(eta(0.0), 0.439900, epsilon = 1e-6);
        assert_abs_diff_eq!(eta(0.5), 0.5702, epsilon = 1e-4);
    }

    #[test]
    fn eta_coefficients_ordered() {
        let c = EtaCoefficients::from_mu(0.9).unwrap();
        assert!(c.rho0 < c.rho1 && c.rho1 < 1.0);
        assert!(EtaCoefficients::from_mu(1.0).is_err());
    }

    #[test]
    fn omega_of_identity() {
        let sigma = CorrelationMatrix::new(DMatrix::identity(3, 3)).unwrap();
        let omega = build_omega(&sigma).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { PI / (4.0 + PI) };
                assert_abs_diff_eq!(omega.get(i, j), expected, epsilon = 1e-15);
            }
        }
        let ones = CorrelationMatrix::new(DMatrix::from_element(2, 2, 1.0)).unwrap();
        assert_eq!(
            build_omega(&ones).unwrap().entries(),
            &DMatrix::from_element(2, 2, 1.0)
        );
    }

    #[test]
    fn omega_keeps_toeplitz_structure() {
        let sigma = build_sigma(&PortGeometry::new(12, 1.0).unwrap()).unwrap();
        let omega = build_omega(&sigma).unwrap();
        for i in 0..12 {
            for j in 0..12 {
                assert_eq!(omega.get(i, j), omega.get(0, i.abs_diff(j)));
            }
        }
    }

    #[test]
    fn omega_hat_layouts() {
        let rho = EtaCoefficients::from_mu(0.9).unwrap();
        let one = build_omega_hat(&BlockSpec::new(vec![2], 0.9).unwrap()).unwrap();
        assert_eq!(
            one.entries(),
            &DMatrix::from_row_slice(2, 2, &[1.0, rho.rho1, rho.rho1, 1.0])
        );
        let singles = build_omega_hat(&BlockSpec::new(vec![1, 1], 0.9).unwrap()).unwrap();
        assert_eq!(
            singles.entries(),
            &DMatrix::from_row_slice(2, 2, &[1.0, rho.rho0, rho.rho0, 1.0])
        );
        let mixed = build_omega_hat(&BlockSpec::new(vec![2, 1], 0.9).unwrap()).unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(3, 3, &[
            1.0, rho.rho1, rho.rho0,
            rho.rho1, 1.0, rho.rho0,
            rho.rho0, rho.rho0, 1.0,
        ]);
        assert_eq!(mixed.entries(), &expected);
    }
}
