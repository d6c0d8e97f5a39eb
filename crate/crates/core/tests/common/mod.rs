//! Independent numerical oracles shared by the integration and acceptance
//! tests. Nothing here calls into the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    assert!(n.is_multiple_of(2));
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

/// `I0(x) e^{-x}` from `(1/pi) int_0^pi exp(x (cos t - 1)) dt`, trapezoid
/// on a periodic integrand.
pub fn bessel_i0_scaled(x: f64) -> f64 {
    let n = 400;
    let h = PI / n as f64;
    let mut s = 0.5 * (1.0 + (-2.0 * x).exp());
    for i in 1..n {
        s += (x * ((i as f64 * h).cos() - 1.0)).exp();
    }
    s * h / PI
}

/// `K1(x) = int_0^inf exp(-x cosh t) cosh t dt`.
pub fn bessel_k1(x: f64) -> f64 {
    assert!(x > 0.0);
    let h = 1e-3;
    let mut s = 0.5 * (-x).exp();
    let mut t: f64 = h;
    loop {
        let c = t.cosh();
        let term = (-x * c).exp() * c;
        s += term;
        if x * c > 60.0 {
            break;
        }
        t += h;
    }
    s * h
}

/// CDF of the product of two independent unit-power Rayleigh envelopes.
pub fn double_rayleigh_cdf(y: f64) -> f64 {
    if y <= 0.0 {
        0.0
    } else {
        1.0 - 2.0 * y * bessel_k1(2.0 * y)
    }
}

/// `E[R1 R2]` for unit-power Rayleigh envelopes whose complex Gaussians have
/// correlation `g`, integrated directly from the bivariate Rayleigh density.
pub fn bivariate_rayleigh_cross_moment(g: f64) -> f64 {
    let q = 1.0 - g * g;
    let upper = 8.0;
    let n = 600;
    let inner = |r1: f64| {
        simpson(
            |r2| {
                let x = 2.0 * g * r1 * r2 / q;
                let log_part = -(r1 * r1 + r2 * r2) / q + x;
                4.0 * r1 * r1 * r2 * r2 / q * log_part.exp() * bessel_i0_scaled(x)
            },
            0.0,
            upper,
            n,
        )
    };
    simpson(inner, 0.0, upper, n)
}

/// Standard normal CDF by Simpson integration of the density from a far
/// cutoff.
pub fn normal_cdf_oracle(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
    if x < 0.0 {
        simpson(pdf, -12.0, x, 20000)
    } else {
        1.0 - simpson(pdf, x, 12.0, 20000)
    }
}

/// `P(X <= a, Y <= b)` for a standard bivariate normal with correlation
/// `rho`, by conditioning on `X`.
pub fn bivariate_normal_cdf(a: f64, b: f64, rho: f64) -> f64 {
    let s = (1.0 - rho * rho).sqrt();
    let lo = -12.0f64;
    simpson(
        |x| {
            (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
                * 0.5
                * erfc_oracle(-(b - rho * x) / s / 2f64.sqrt())
        },
        lo,
        a.max(lo),
        4000,
    )
}

/// erfc by continued fraction for large arguments and a Taylor series near
/// zero; accurate to ~1e-14.
pub fn erfc_oracle(x: f64) -> f64 {
    if x < 0.0 {
        return 2.0 - erfc_oracle(-x);
    }
    if x < 3.0 {
        // erf Taylor series
        let mut term = x;
        let mut sum = x;
        let mut k = 0.0;
        loop {
            k += 1.0;
            term *= -x * x / k;
            let add = term / (2.0 * k + 1.0);
            sum += add;
            if add.abs() <= 1e-17 * sum.abs() || k > 300.0 {
                break;
            }
        }
        1.0 - 2.0 / PI.sqrt() * sum
    } else {
        // Lentz continued fraction for erfc
        let mut f = x;
        let mut c = x;
        let mut d = 0.0;
        for k in 1..200 {
            let a = k as f64 / 2.0;
            d = x + a * d;
            d = 1.0 / d;
            c = x + a / c;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (-x * x).exp() / PI.sqrt() / f
    }
}

/// Every partition of `n` into exactly `parts` positive parts, nonincreasing.
pub fn partitions(n: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(
        n: usize,
        parts: usize,
        max_part: usize,
        prefix: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if parts == 0 {
            if n == 0 {
                out.push(prefix.clone());
            }
            return;
        }
        if n < parts {
            return;
        }
        let hi = max_part.min(n - (parts - 1));
        for first in (1..=hi).rev() {
            prefix.push(first);
            rec(n - first, parts - 1, first, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, parts, n, &mut Vec::new(), &mut out);
    out
}

/// Kolmogorov distance between the empirical CDF of `samples` and `cdf`.
pub fn kolmogorov_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Least-squares slope of `ln t` against `ln d`.
pub fn log_log_slope(d: &[f64], t: &[f64]) -> f64 {
    let x: Vec<f64> = d.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = t.iter().map(|v| v.ln()).collect();
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}
