//! Multivariate normal CDF `P(X_1 <= y, ..., X_N <= y)` by sequential
//! conditioning on a pivoted Cholesky factor, integrated with randomly
//! shifted Richtmyer lattice points.
//!
//! Variables are ordered so the least likely constraint is conditioned on
//! first (Genz-Bretz ordering). Directions with vanishing conditional variance
//! are moved to the end and handled as exact linear constraints, so rank
//! deficient covariances are supported. Each randomization replicate gets
//! its own shift from a seed-derived stream; the spread of the replicate
//! means gives the standard error.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::normal::{normal_cdf, normal_pdf, normal_quantile};
use crate::corr::clip_negative_eigenvalues;
use crate::error::{Error, Result};

pub const DEFAULT_MVN_POINTS: usize = 1 << 14;
pub const DEFAULT_MVN_REPLICATES: usize = 8;
const DEFAULT_MAX_POINTS: usize = 1 << 22;
/// Conditional variances below this (in correlation units) are treated as 0.
const SINGULAR_VARIANCE: f64 = 1e-10;
const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MvnProblem {
    pub upper_limit: f64,
    pub mean: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub rng_seed: u64,
    /// Lattice points per replicate (each evaluated with its antithetic twin).
    pub sample_budget: usize,
    pub replicates: usize,
    /// When set, the point count doubles until the standard error reaches
    /// this value or `max_sample_budget` is hit.
    pub target_error: Option<f64>,
    pub max_sample_budget: usize,
}

impl MvnProblem {
    pub fn new(upper_limit: f64, mean: Vec<f64>, covariance: DMatrix<f64>) -> Self {
        MvnProblem {
            upper_limit,
            mean,
            covariance,
            rng_seed: 0,
            sample_budget: DEFAULT_MVN_POINTS,
            replicates: DEFAULT_MVN_REPLICATES,
            target_error: None,
            max_sample_budget: DEFAULT_MAX_POINTS,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn with_budget(mut self, points: usize) -> Self {
        self.sample_budget = points;
        self
    }

    pub fn with_target_error(mut self, target: f64) -> Self {
        self.target_error = Some(target);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnEstimate {
    pub value: f64,
    pub error_estimate: f64,
    pub points_per_replicate: usize,
}

/// Pivoted lower factor of the standardized problem.
struct Conditioning {
    /// Row-major lower factor; row `i` holds `l[i][0..=i]`.
    rows: Vec<Vec<f64>>,
    limits: Vec<f64>,
    /// Number of leading rows with positive conditional variance.
    regular: usize,
}

impl Conditioning {
    fn build(corr: &DMatrix<f64>, limits: Vec<f64>) -> Result<Self> {
        let n = limits.len();
        let mut r = corr.clone();
        let mut b = limits;
        let mut l = DMatrix::<f64>::zeros(n, n);
        let mut expected = vec![0.0; n];
        let mut regular = n;

        for i in 0..n {
            let mut pivot = None;
            let mut best = f64::INFINITY;
            for j in i..n {
                let lj = l.row(j);
                let var = r[(j, j)] - (0..i).map(|k| lj[k] * lj[k]).sum::<f64>();
                if var > SINGULAR_VARIANCE {
                    let shift: f64 = (0..i).map(|k| lj[k] * expected[k]).sum();
                    let p = normal_cdf((b[j] - shift) / var.sqrt());
                    if p < best || pivot.is_none() {
                        best = p;
                        pivot = Some(j);
                    }
                } else if var < -1e-8 {
                    return Err(Error::Factorization(format!(
                        "negative conditional variance {var:e} at pivot {i}"
                    )));
                }
            }
            let Some(j) = pivot else {
                regular = i;
                break;
            };
            if j != i {
                r.swap_rows(i, j);
                r.swap_columns(i, j);
                l.swap_rows(i, j);
                b.swap(i, j);
            }
            let var = r[(i, i)] - (0..i).map(|k| l[(i, k)] * l[(i, k)]).sum::<f64>();
            let sd = var.sqrt();
            l[(i, i)] = sd;
            for m in i + 1..n {
                let dot: f64 = (0..i).map(|k| l[(m, k)] * l[(i, k)]).sum();
                l[(m, i)] = (r[(m, i)] - dot) / sd;
            }
            let shift: f64 = (0..i).map(|k| l[(i, k)] * expected[k]).sum();
            let a = (b[i] - shift) / sd;
            let mass = normal_cdf(a);
            // mean of a standard normal truncated to (-inf, a]
            expected[i] = if mass > 1e-300 {
                -normal_pdf(a) / mass
            } else {
                a
            };
        }

        let rows = (0..n)
            .map(|i| (0..=i).map(|k| l[(i, k)]).collect())
            .collect();
        Ok(Conditioning {
            rows,
            limits: b,
            regular,
        })
    }

    /// The last regular variable only needs sampling when exact linear
    /// constraints follow it.
    fn dims(&self) -> usize {
        if self.regular < self.rows.len() {
            self.regular
        } else {
            self.regular - 1
        }
    }

    fn integrand(&self, w: &[f64], z: &mut [f64]) -> f64 {
        let mut f = 1.0;
        for i in 0..self.regular {
            let row = &self.rows[i];
            let s: f64 = row[..i].iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
            let e = normal_cdf((self.limits[i] - s) / row[i]);
            f *= e;
            if f == 0.0 {
                return 0.0;
            }
            if i < w.len() {
                let u = (w[i] * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0);
                z[i] = normal_quantile(u);
            }
        }
        for i in self.regular..self.rows.len() {
            let row = &self.rows[i];
            let k = row.len().min(self.regular);
            let s: f64 = row[..k].iter().zip(&z[..k]).map(|(a, b)| a * b).sum();
            if s > self.limits[i] {
                return 0.0;
            }
        }
        f
    }
}

fn first_primes(count: usize) -> Vec<u64> {
    let mut primes: Vec<u64> = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while primes.len() < count {
        if primes
            .iter()
            .take_while(|&&p| p * p <= candidate)
            .all(|&p| !candidate.is_multiple_of(p))
        {
            primes.push(candidate);
        }
        candidate += 1;
    }
    primes
}

struct Replicate {
    shift: Vec<f64>,
    sum: f64,
    points: usize,
}

impl Replicate {
    fn extend(&mut self, cond: &Conditioning, generators: &[f64], upto: usize) {
        let d = generators.len();
        let mut w = vec![0.0; d];
        let mut anti = vec![0.0; d];
        let mut z = vec![0.0; cond.rows.len()];
        for k in self.points + 1..=upto {
            for j in 0..d {
                let x = (k as f64 * generators[j] + self.shift[j]).fract();
                let tent = (2.0 * x - 1.0).abs();
                w[j] = tent;
                anti[j] = 1.0 - tent;
            }
            let f = cond.integrand(&w, &mut z) + cond.integrand(&anti, &mut z);
            self.sum += 0.5 * f;
        }
        self.points = upto;
    }

    fn mean(&self) -> f64 {
        self.sum / self.points as f64
    }
}

/// Estimates the joint CDF at a common upper limit.
pub fn mvn_cdf(problem: &MvnProblem) -> Result<MvnEstimate> {
    let n = problem.mean.len();
    let cov = &problem.covariance;
    if n == 0 {
        return Err(Error::invalid("mean", "dimension must be at least one"));
    }
    if cov.nrows() != n || cov.ncols() != n {
        return Err(Error::invalid(
            "covariance",
            format!("expected {n}x{n}, got {}x{}", cov.nrows(), cov.ncols()),
        ));
    }
    if problem.replicates < 2 {
        return Err(Error::invalid(
            "replicates",
            "at least two replicates are needed",
        ));
    }
    if problem.sample_budget == 0 {
        return Err(Error::invalid("sample_budget", "must be positive"));
    }
    if cov.iter().any(|v| !v.is_finite()) || problem.upper_limit.is_nan() {
        return Err(Error::Factorization("non-finite input".into()));
    }

    // constant coordinates are either always satisfied or make the event empty
    let mut keep = Vec::with_capacity(n);
    for i in 0..n {
        let var = cov[(i, i)];
        if var < 0.0 {
            return Err(Error::Factorization(format!(
                "negative variance {var:e} at {i}"
            )));
        }
        if var == 0.0 {
            if problem.mean[i] > problem.upper_limit {
                return Ok(MvnEstimate {
                    value: 0.0,
                    error_estimate: 0.0,
                    points_per_replicate: 0,
                });
            }
        } else {
            keep.push(i);
        }
    }
    if keep.is_empty() {
        return Ok(MvnEstimate {
            value: 1.0,
            error_estimate: 0.0,
            points_per_replicate: 0,
        });
    }

    let m = keep.len();
    let sd: Vec<f64> = keep.iter().map(|&i| cov[(i, i)].sqrt()).collect();
    let mut corr = DMatrix::from_fn(m, m, |a, b| {
        let v = cov[(keep[a], keep[b])] / (sd[a] * sd[b]);
        if a == b {
            1.0
        } else {
            v
        }
    });
    corr = (&corr + corr.transpose()) * 0.5;
    let limits: Vec<f64> = keep
        .iter()
        .zip(&sd)
        .map(|(&i, s)| (problem.upper_limit - problem.mean[i]) / s)
        .collect();

    let min_eig = nalgebra::SymmetricEigen::new(corr.clone())
        .eigenvalues
        .min();
    if min_eig < -PSD_TOLERANCE * m as f64 {
        log::warn!("covariance is indefinite (min eigenvalue {min_eig:e}); repairing");
        let repaired = clip_negative_eigenvalues(&corr)?;
        let d: Vec<f64> = (0..m)
            .map(|i| repaired[(i, i)].max(f64::MIN_POSITIVE).sqrt())
            .collect();
        corr = DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                1.0
            } else {
                repaired[(a, b)] / (d[a] * d[b])
            }
        });
    }

    let cond = Conditioning::build(&corr, limits)?;
    let dims = cond.dims();
    let generators: Vec<f64> = first_primes(dims)
        .iter()
        .map(|&p| (p as f64).sqrt().fract())
        .collect();

    let mut replicates: Vec<Replicate> = (0..problem.replicates)
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(problem.rng_seed);
            rng.set_stream(r as u64);
            Replicate {
                shift: (0..dims).map(|_| rng.random::<f64>()).collect(),
                sum: 0.0,
                points: 0,
            }
        })
        .collect();

    let mut budget = problem.sample_budget;
    loop {
        replicates
            .par_iter_mut()
            .for_each(|rep| rep.extend(&cond, &generators, budget));
        let means: Vec<f64> = replicates.iter().map(Replicate::mean).collect();
        let count = means.len() as f64;
        let value = means.iter().sum::<f64>() / count;
        let var = means.iter().map(|x| (x - value) * (x - value)).sum::<f64>() / (count - 1.0);
        let error_estimate = (var / count).sqrt();
        let done = match problem.target_error {
            Some(target) => error_estimate <= target || budget >= problem.max_sample_budget,
            None => true,
        };
        if done {
            return Ok(MvnEstimate {
                value: value.clamp(0.0, 1.0),
                error_estimate,
                points_per_replicate: budget,
            });
        }
        budget = (budget * 2).min(problem.max_sample_budget);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn equicorrelated(n: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho })
    }

    #[test]
    fn univariate_median() {
        let p = MvnProblem::new(3.0, vec![3.0], DMatrix::from_element(1, 1, 2.5));
        let est = mvn_cdf(&p).unwrap();
        assert_abs_diff_eq!(est.value, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn independent_pair() {
        let p = MvnProblem::new(0.0, vec![0.0, 0.0], DMatrix::identity(2, 2));
        assert_abs_diff_eq!(mvn_cdf(&p).unwrap().value, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn trivariate_orthant() {
        let expected = 0.125 + 3.0 / (4.0 * PI) * 0.5f64.asin();
        let p = MvnProblem::new(0.0, vec![0.0; 3], equicorrelated(3, 0.5)).with_seed(7);
        let est = mvn_cdf(&p).unwrap();
        assert!((est.value - expected).abs() <= 3.0 * est.error_estimate.max(1e-6));
        assert_abs_diff_eq!(est.value, 0.25, epsilon = 1e-4);
    }

    #[test]
    fn equicorrelated_orthant_closed_form() {
        // P(all <= 0) for equicorrelation 1/2 over n variables is 1 / (n + 1)
        let p = MvnProblem::new(0.0, vec![0.0; 6], equicorrelated(6, 0.5)).with_seed(3);
        let est = mvn_cdf(&p).unwrap();
        assert_abs_diff_eq!(est.value, 1.0 / 7.0, epsilon = 1e-3);
    }

    #[test]
    fn rank_deficient_covariance() {
        // three copies of one variable: the joint CDF equals the marginal
        let p = MvnProblem::new(0.7, vec![0.0; 3], DMatrix::from_element(3, 3, 1.0));
        let est = mvn_cdf(&p).unwrap();
        assert_abs_diff_eq!(est.value, normal_cdf(0.7), epsilon = 1e-12);
    }

    #[test]
    fn degenerate_coordinates() {
        let mut cov = DMatrix::identity(2, 2);
        cov[(1, 1)] = 0.0;
        let below = MvnProblem::new(0.0, vec![0.0, -1.0], cov.clone());
        assert_abs_diff_eq!(mvn_cdf(&below).unwrap().value, 0.5, epsilon = 1e-12);
        let above = MvnProblem::new(0.0, vec![0.0, 1.0], cov);
        assert_eq!(mvn_cdf(&above).unwrap().value, 0.0);
    }

    #[test]
    fn reproducible_for_a_seed() {
        let p = MvnProblem::new(0.3, vec![0.0; 5], equicorrelated(5, 0.3))
            .with_seed(11)
            .with_budget(1024);
        assert_eq!(mvn_cdf(&p).unwrap(), mvn_cdf(&p).unwrap());
    }

    #[test]
    fn target_error_drives_budget() {
        let p = MvnProblem::new(0.3, vec![0.0; 8], equicorrelated(8, 0.3))
            .with_budget(64)
            .with_target_error(1e-4);
        let est = mvn_cdf(&p).unwrap();
        assert!(est.error_estimate <= 1e-4);
        assert!(est.points_per_replicate > 64);
    }

    #[test]
    fn shape_errors() {
        let p = MvnProblem::new(0.0, vec![0.0; 2], DMatrix::identity(3, 3));
        assert!(mvn_cdf(&p).is_err());
        let p = MvnProblem::new(0.0, vec![], DMatrix::zeros(0, 0));
        assert!(mvn_cdf(&p).is_err());
    }
}
