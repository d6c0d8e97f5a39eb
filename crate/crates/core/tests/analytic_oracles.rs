//! Library results against independently computed references.

mod common;

use std::f64::consts::PI;

use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;

use fasris::corr::{build_sigma, eigen_spectrum, BlockSpec, PortGeometry};
use fasris::moments::{
    build_omega, build_omega_hat, envelope_cross_moment, eta, gamma_moments, EtaCoefficients,
    LinkBudget,
};
use fasris::outage::{
    block_conditional_cdf, clt_bc_cdf, clt_cdf, clt_iid_cdf, outage_threshold, MvnSettings,
    RadioParams,
};
use fasris::quad::{mvn_cdf, normal_cdf, ChebyshevRule, MvnProblem, TruncationPolicy};
use fasris::sim::{trial_rng, PortGainSampler};
use fasris::SystemConfig;

use common::*;

// numpy.linalg.eigvalsh of the N=20, W=1 port correlation matrix
const SPECTRUM_N20_W1: [f64; 6] = [
    9.367714300474304,
    7.526379341751276,
    2.770232766200515,
    0.3201821367443394,
    0.0150776708517169,
    0.0004064686890033385,
];

#[test]
fn oracle_helpers_reproduce_known_values() {
    // K1(1) and I0(1) e^-1 from tables
    assert_abs_diff_eq!(bessel_k1(1.0), 0.6019072301972346, epsilon = 1e-12);
    assert_abs_diff_eq!(
        bessel_i0_scaled(1.0),
        1.2660658777520082 * (-1.0f64).exp(),
        epsilon = 1e-13
    );
    assert_abs_diff_eq!(erfc_oracle(0.5), 0.4795001221869535, epsilon = 1e-14);
    assert_abs_diff_eq!(erfc_oracle(4.0), 1.541725790028002e-8, epsilon = 1e-20);
    assert_abs_diff_eq!(
        bivariate_normal_cdf(0.0, 0.0, 0.5),
        1.0 / 3.0,
        epsilon = 1e-10
    );
}

#[test]
fn normal_cdf_matches_integrated_density() {
    for x in [-6.0, -2.5, -1.0, 0.0, 0.3, 1.7, 4.0] {
        assert_abs_diff_eq!(normal_cdf(x), normal_cdf_oracle(x), epsilon = 1e-12);
    }
}

#[test]
fn spectrum_fixture_n20_w1() {
    let spectrum =
        eigen_spectrum(&build_sigma(&PortGeometry::new(20, 1.0).unwrap()).unwrap()).unwrap();
    for (got, want) in spectrum.values.iter().zip(SPECTRUM_N20_W1) {
        assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
    }
    assert!(spectrum.values[6..].iter().all(|v| v.abs() < 1e-5));
    assert_abs_diff_eq!(spectrum.total_mass, 20.0, epsilon = 1e-10);
    assert_eq!(spectrum.values.iter().filter(|&&v| v >= 0.1).count(), 4);
}

#[test]
fn cross_moment_against_bivariate_rayleigh_integral() {
    let oracle = bivariate_rayleigh_cross_moment(0.5);
    assert_abs_diff_eq!(envelope_cross_moment(0.5, 1.0), oracle, epsilon = 1e-6);
    assert_abs_diff_eq!(
        envelope_cross_moment(0.0, 1.0),
        bivariate_rayleigh_cross_moment(0.0),
        epsilon = 1e-6
    );
    assert_abs_diff_eq!(
        envelope_cross_moment(0.8, 1.0),
        bivariate_rayleigh_cross_moment(0.8),
        epsilon = 1e-6
    );
}

#[test]
fn moment_and_threshold_examples() {
    let m = gamma_moments(&LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap());
    assert_abs_diff_eq!(m.mean, 40.0 * PI * 2.5e-5 / 4.0, epsilon = 1e-18);
    assert_abs_diff_eq!(m.mean, 7.85398e-4, epsilon = 1e-9);
    assert_abs_diff_eq!(m.variance, 9.5788e-9, epsilon = 1e-13);
    let y = outage_threshold(&RadioParams::new(0.1, 1e-8, 3.0).unwrap());
    assert_abs_diff_eq!(y, 7e-7f64.sqrt(), epsilon = 1e-18);
}

#[test]
fn conditional_cdf_against_integrated_density() {
    let m = gamma_moments(&LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap());
    let (rho0, rho1) = (eta(0.0), eta(0.9));
    let sd = (m.variance * (1.0 - rho1)).sqrt();
    for (y, xd, x0) in [(8e-4, 1e-5, -2e-5), (7e-4, -3e-5, 0.0), (9e-4, 2e-5, 4e-5)] {
        let center = m.mean + xd + x0;
        let density =
            |x: f64| (-0.5 * ((x - center) / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt());
        let oracle = simpson(density, center - 40.0 * sd, y, 20000);
        assert_abs_diff_eq!(
            block_conditional_cdf(y, xd, x0, &m, rho0, rho1),
            oracle,
            epsilon = 1e-10
        );
    }
}

fn default_mvn() -> MvnSettings {
    MvnSettings {
        points_per_replicate: 1 << 14,
        replicates: 8,
        seed: 3,
        target_error: None,
    }
}

#[test]
fn block_estimator_equals_full_cdf_of_block_matrix() {
    let m = gamma_moments(&LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap());
    let rule = ChebyshevRule::new(100).unwrap();
    let rho = EtaCoefficients::from_mu(0.9).unwrap();
    for sizes in [vec![2, 1, 1, 1], vec![4, 4, 1, 1], vec![3], vec![5, 2]] {
        let spec = BlockSpec::new(sizes.clone(), 0.9).unwrap();
        let omega_hat = build_omega_hat(&spec).unwrap();
        for y in [7e-4, m.mean, 8.4e-4] {
            let full = clt_cdf(y, &omega_hat, &m, &default_mvn()).unwrap();
            let nested =
                clt_bc_cdf(y, &sizes, rho, &m, &rule, &TruncationPolicy::default()).unwrap();
            assert!(
                (full.value - nested).abs() < 1e-4 + 4.0 * full.error_estimate,
                "{sizes:?} y={y}: {} vs {nested}",
                full.value
            );
        }
    }
}

#[test]
fn two_port_clt_matches_bivariate_oracle() {
    // W=2 makes the port correlation 0, leaving only the shared-term floor
    let budget = LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap();
    let m = gamma_moments(&budget);
    let omega = build_omega(&build_sigma(&PortGeometry::new(2, 2.0).unwrap()).unwrap()).unwrap();
    assert_abs_diff_eq!(omega.get(0, 1), PI / (4.0 + PI), epsilon = 1e-12);
    let y = 8.3e-4;
    let z = (y - m.mean) / m.variance.sqrt();
    let oracle = bivariate_normal_cdf(z, z, PI / (4.0 + PI));
    let est = clt_cdf(y, &omega, &m, &default_mvn()).unwrap();
    assert!(
        (est.value - oracle).abs() < 1e-5,
        "{} vs {oracle}",
        est.value
    );
}

#[test]
fn single_block_and_single_port_collapse_to_univariate() {
    let m = gamma_moments(&LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap());
    let rule = ChebyshevRule::new(100).unwrap();
    let rho = EtaCoefficients::from_mu(0.9).unwrap();
    let policy = TruncationPolicy::default();
    for y in [6e-4, 7.85e-4, 8.4e-4, 1e-3] {
        let exact = normal_cdf((y - m.mean) / m.variance.sqrt());
        assert_abs_diff_eq!(
            clt_bc_cdf(y, &[1], rho, &m, &rule, &policy).unwrap(),
            exact,
            epsilon = 1e-4
        );
        assert_abs_diff_eq!(
            clt_iid_cdf(y, 1, eta(0.0), &m, &rule, &policy).unwrap(),
            exact,
            epsilon = 1e-4
        );
    }
    // independent medians
    assert_abs_diff_eq!(
        clt_iid_cdf(m.mean, 2, 0.0, &m, &rule, &policy).unwrap(),
        0.25,
        epsilon = 1e-4
    );
    assert_abs_diff_eq!(
        clt_iid_cdf(m.mean, 2, 1e-12, &m, &rule, &policy).unwrap(),
        0.25,
        epsilon = 1e-4
    );
}

#[test]
fn singleton_blocks_approach_iid_limit() {
    let m = gamma_moments(&LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap());
    let rule = ChebyshevRule::new(100).unwrap();
    let policy = TruncationPolicy::default();
    let rho0 = eta(0.0);
    let rho = EtaCoefficients {
        rho0,
        rho1: rho0 + 1e-9,
    };
    for d in [1, 3, 6] {
        let sizes = vec![1; d];
        for y in [7.5e-4, 8.4e-4] {
            let bc = clt_bc_cdf(y, &sizes, rho, &m, &rule, &policy).unwrap();
            let iid = clt_iid_cdf(y, d, rho0, &m, &rule, &policy).unwrap();
            assert_abs_diff_eq!(bc, iid, epsilon = 1e-4);
        }
    }
}

#[test]
fn trivariate_equicorrelated_orthant() {
    // P(all <= 0) for rho = 1/2 is 1/4
    let cov = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { 0.5 });
    let est = mvn_cdf(&MvnProblem::new(0.0, vec![0.0; 3], cov).with_seed(9)).unwrap();
    assert!((est.value - 0.25).abs() <= 3.0 * est.error_estimate.max(1e-7));
}

#[test]
fn empirical_port_correlation_matches_eta() {
    let geometry = PortGeometry::new(11, 1.0).unwrap();
    let budget = LinkBudget::new(40, 2.5e-5, 2.5e-5).unwrap();
    let system = SystemConfig::new(geometry, budget, RadioParams::new(0.1, 1e-8, 3.0).unwrap());
    let sampler = PortGainSampler::new(&system).unwrap();
    let trials = 100_000u64;
    let mut gains = vec![0.0; 11];
    let lags = [1usize, 2, 5];
    let mut sums = [[0.0f64; 5]; 3];
    for i in 0..trials {
        sampler.sample(&mut trial_rng(21, i), &mut gains);
        for (s, &lag) in sums.iter_mut().zip(&lags) {
            let (a, b) = (gains[0], gains[lag]);
            s[0] += a;
            s[1] += b;
            s[2] += a * a;
            s[3] += b * b;
            s[4] += a * b;
        }
    }
    let n = trials as f64;
    for (s, &lag) in sums.iter().zip(&lags) {
        let (ma, mb) = (s[0] / n, s[1] / n);
        let cov = s[4] / n - ma * mb;
        let r = cov / ((s[2] / n - ma * ma) * (s[3] / n - mb * mb)).sqrt();
        let g = fasris::corr::port_correlation(lag as i64, &geometry);
        let want = eta(g);
        let se = (1.0 - want * want) / n.sqrt();
        assert!(
            (r - want).abs() < 3.0 * se,
            "lag {lag}: {r} vs {want} (se {se})"
        );
    }
}

#[test]
fn cross_moment_against_sampled_envelopes() {
    for (i, g) in [0.0, 0.3, 0.7, 0.95].into_iter().enumerate() {
        let est = fasris::sim::empirical_cross_moment(g, 1_000_000, 100 + i as u64).unwrap();
        let exact = envelope_cross_moment(g, 1.0);
        assert!(
            (est.mean - exact).abs() < 3.0 * est.std_error,
            "g={g}: {} vs {exact}",
            est.mean
        );
    }
}
