//! Monte Carlo simulation of the physical channel.
//!
//! Each trial draws `h_m ~ CN(0, eps1)` and, for every RIS element, a port
//! vector `v_m ~ CN(0, eps2 * Sigma)`, forms the co-phased gains
//! `gamma_k = sum_m |h_m| |v_{m,k}|` and records whether the best port falls
//! at or below the outage threshold. Noise never has to be drawn because the
//! outage event is a deterministic function of the best gain.
//!
//! Trial `i` always consumes ChaCha stream `i` of the seed's key, so results
//! do not depend on chunking or on how many worker threads run the chunks.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::corr::build_sigma;
use crate::error::{Error, Result};
use crate::moments::gamma_moments;
use crate::quad::psd_sqrt;
use crate::system::SystemConfig;

pub const DEFAULT_TRIALS: u64 = 1_000_000;
pub const DEFAULT_CHUNK_SIZE: u64 = 4096;
/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959963984540054;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimPlan {
    pub config: SystemConfig,
    pub num_trials: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl SimPlan {
    pub fn new(config: SystemConfig, num_trials: u64, seed: u64) -> Self {
        SimPlan {
            config,
            num_trials,
            seed,
            chunk_size: DEFAULT_CHUNK_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEstimate {
    pub outage_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub trials: u64,
    pub outages: u64,
    /// Sample mean of the first port's gain.
    pub mean_gamma: f64,
    /// Sample variance of the first port's gain.
    pub var_gamma: f64,
    pub mean_gamma_se: f64,
    pub var_gamma_se: f64,
}

impl SimEstimate {
    /// Half-width of the 95% interval, as a standard-error-like figure.
    pub fn error_estimate(&self) -> f64 {
        0.5 * (self.ci_high - self.ci_low)
    }
}

/// RNG for one trial: stream `trial` of the key derived from `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Draws the per-port combined gains of one channel realization.
#[derive(Debug, Clone)]
pub struct PortGainSampler {
    /// Row-major `ports x rank` square root of `Sigma`.
    factor: Vec<f64>,
    ports: usize,
    rank: usize,
    elements: usize,
    scale: f64,
}

impl PortGainSampler {
    pub fn new(config: &SystemConfig) -> Result<Self> {
        let sigma = build_sigma(&config.geometry)?;
        let f = psd_sqrt(sigma.entries(), sigma.default_psd_tolerance())?;
        let (ports, rank) = (f.order(), f.rank());
        let factor = (0..ports)
            .flat_map(|i| (0..rank).map(move |j| (i, j)))
            .map(|(i, j)| f.factor()[(i, j)])
            .collect();
        let budget = &config.budget;
        // |h| = sqrt(eps1 * Exp(1)); Re v and Im v each carry eps2 / 2
        let scale = (budget.gain_bs_ris() * budget.gain_ris_user() / 2.0).sqrt();
        Ok(PortGainSampler {
            factor,
            ports,
            rank,
            elements: budget.num_elements(),
            scale,
        })
    }

    pub fn ports(&self) -> usize {
        self.ports
    }

    /// Number of independent Gaussian directions drawn per element.
    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Fills `gains` (length `ports`) with one realization.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, gains: &mut [f64]) {
        debug_assert_eq!(gains.len(), self.ports);
        let mut re = vec![0.0; self.rank];
        let mut im = vec![0.0; self.rank];
        gains.fill(0.0);
        for _ in 0..self.elements {
            let h = rng.sample::<f64, _>(Exp1).sqrt();
            for j in 0..self.rank {
                re[j] = rng.sample(StandardNormal);
                im[j] = rng.sample(StandardNormal);
            }
            for (k, gain) in gains.iter_mut().enumerate() {
                let row = &self.factor[k * self.rank..(k + 1) * self.rank];
                let (mut x, mut y) = (0.0, 0.0);
                for j in 0..self.rank {
                    x += row[j] * re[j];
                    y += row[j] * im[j];
                }
                *gain += h * (x * x + y * y).sqrt();
            }
        }
        for gain in gains.iter_mut() {
            *gain *= self.scale;
        }
    }
}

pub fn sample_port_gains<R: Rng + ?Sized>(rng: &mut R, sampler: &PortGainSampler) -> Vec<f64> {
    let mut gains = vec![0.0; sampler.ports()];
    sampler.sample(rng, &mut gains);
    gains
}

#[derive(Debug, Clone, Copy, Default)]
struct ChunkTally {
    outages: u64,
    // central sums of (gamma_1 - analytic mean)^p, p = 1..4
    s1: f64,
    s2: f64,
    s3: f64,
    s4: f64,
}

/// Wilson score interval for `k` successes in `n` trials.
fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// 95% interval: Wald when both counts reach 30, Wilson otherwise.
pub fn binomial_interval(outages: u64, trials: u64) -> (f64, f64) {
    let p = outages as f64 / trials as f64;
    let (lo, hi) = if outages >= 30 && trials - outages >= 30 {
        let half = Z95 * (p * (1.0 - p) / trials as f64).sqrt();
        (p - half, p + half)
    } else {
        wilson_interval(outages, trials)
    };
    (lo.clamp(0.0, p), hi.clamp(p, 1.0))
}

/// Fraction of trials whose best port gain is at or below the threshold of
/// `plan.config`.
pub fn empirical_outage(plan: &SimPlan) -> Result<SimEstimate> {
    if plan.num_trials == 0 {
        return Err(Error::NoTrials);
    }
    if plan.chunk_size == 0 {
        return Err(Error::invalid("chunk_size", "must be positive"));
    }
    let sampler = PortGainSampler::new(&plan.config)?;
    let threshold = plan.config.threshold();
    let center = gamma_moments(&plan.config.budget).mean;
    let chunks = plan.num_trials.div_ceil(plan.chunk_size);

    let tallies: Vec<ChunkTally> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * plan.chunk_size;
            let end = (start + plan.chunk_size).min(plan.num_trials);
            let mut gains = vec![0.0; sampler.ports()];
            let mut tally = ChunkTally::default();
            for trial in start..end {
                let mut rng = trial_rng(plan.seed, trial);
                sampler.sample(&mut rng, &mut gains);
                let best = gains.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if best <= threshold {
                    tally.outages += 1;
                }
                let d = gains[0] - center;
                let d2 = d * d;
                tally.s1 += d;
                tally.s2 += d2;
                tally.s3 += d2 * d;
                tally.s4 += d2 * d2;
            }
            tally
        })
        .collect();

    let mut total = ChunkTally::default();
    for t in &tallies {
        total.outages += t.outages;
        total.s1 += t.s1;
        total.s2 += t.s2;
        total.s3 += t.s3;
        total.s4 += t.s4;
    }

    let n = plan.num_trials as f64;
    let m1 = total.s1 / n;
    let (r2, r3, r4) = (total.s2 / n, total.s3 / n, total.s4 / n);
    let var = r2 - m1 * m1;
    let m4 = r4 - 4.0 * m1 * r3 + 6.0 * m1 * m1 * r2 - 3.0 * m1.powi(4);
    let sample_var = if plan.num_trials > 1 {
        var * n / (n - 1.0)
    } else {
        0.0
    };

    let p = total.outages as f64 / n;
    let (ci_low, ci_high) = binomial_interval(total.outages, plan.num_trials);
    Ok(SimEstimate {
        outage_probability: p,
        ci_low,
        ci_high,
        trials: plan.num_trials,
        outages: total.outages,
        mean_gamma: center + m1,
        var_gamma: sample_var,
        mean_gamma_se: (var / n).sqrt(),
        var_gamma_se: ((m4 - var * var).max(0.0) / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossMomentEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Sample mean of `|v_k| |v_l|` for unit-power complex Gaussians with
/// correlation `g`.
pub fn empirical_cross_moment(g: f64, trials: u64, seed: u64) -> Result<CrossMomentEstimate> {
    if !(-1.0..=1.0).contains(&g) {
        return Err(Error::invalid("g", format!("must lie in [-1, 1], got {g}")));
    }
    if trials < 2 {
        return Err(Error::NoTrials);
    }
    let independent = (1.0 - g * g).sqrt();
    let chunks = trials.div_ceil(DEFAULT_CHUNK_SIZE);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_rng(seed, c);
            let len = (trials - c * DEFAULT_CHUNK_SIZE).min(DEFAULT_CHUNK_SIZE);
            let (mut s, mut s2) = (0.0, 0.0);
            for _ in 0..len {
                let a: [f64; 4] = [
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                    rng.sample(StandardNormal),
                ];
                let (x1, y1) = (a[0], a[1]);
                let (x2, y2) = (g * a[0] + independent * a[2], g * a[1] + independent * a[3]);
                // each component carries variance 1/2
                let v = 0.5 * ((x1 * x1 + y1 * y1) * (x2 * x2 + y2 * y2)).sqrt();
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let n = trials as f64;
    let (s, s2) = sums
        .iter()
        .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
    let mean = s / n;
    let var = (s2 / n - mean * mean) * n / (n - 1.0);
    Ok(CrossMomentEstimate {
        mean,
        std_error: (var / n).sqrt(),
    })
}
