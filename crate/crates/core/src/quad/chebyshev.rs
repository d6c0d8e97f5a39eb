use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default number of Gauss-Chebyshev nodes.
pub const DEFAULT_CHEBYSHEV_NODES: usize = 100;

/// `U`-point Gauss-Chebyshev rule of the first kind on `[-1, 1]`.
///
/// `int f(x) / sqrt(1 - x^2) dx ~ (pi / U) sum_t f(p_t)`, exact for
/// polynomials of degree up to `2U - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevRule {
    nodes: Vec<f64>,
    weight_scale: f64,
}

impl ChebyshevRule {
    pub fn new(num_nodes: usize) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::invalid(
                "chebyshev_nodes",
                "at least one node is required",
            ));
        }
        let u = num_nodes as f64;
        let nodes = (1..=num_nodes)
            .map(|t| {
                // symmetric pairs come out as exact negatives of each other
                let mirror = num_nodes + 1 - t;
                if 2 * t - 1 == num_nodes {
                    0.0
                } else if t < mirror {
                    ((2 * t - 1) as f64 * PI / (2.0 * u)).cos()
                } else {
                    -((2 * mirror - 1) as f64 * PI / (2.0 * u)).cos()
                }
            })
            .collect();
        Ok(ChebyshevRule {
            nodes,
            weight_scale: PI / u,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weight_scale(&self) -> f64 {
        self.weight_scale
    }

    /// `int_{-1}^{1} f(x) / sqrt(1 - x^2) dx`.
    pub fn integrate_weighted(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.weight_scale * self.nodes.iter().map(|&p| f(p)).sum::<f64>()
    }

    /// Abscissae and weights for a plain integral over `window`.
    pub fn mapped(&self, window: &TruncationWindow) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = window.half_width;
        let c = window.center;
        let scale = h * self.weight_scale;
        self.nodes
            .iter()
            .map(move |&p| (c + h * p, scale * (1.0 - p * p).sqrt()))
    }
}

/// Integration interval `[center - half_width, center + half_width]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncationWindow {
    pub center: f64,
    pub half_width: f64,
}

impl TruncationWindow {
    pub fn new(center: f64, half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::invalid(
                "half_width",
                format!("must be positive and finite, got {half_width}"),
            ));
        }
        Ok(TruncationWindow { center, half_width })
    }
}

/// How the integration window of a Gaussian variable is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruncationPolicy {
    /// `mean +/- sigmas * std_dev` of the variable being integrated.
    Adaptive { sigmas: f64 },
    /// Fixed symmetric `[-half_width, half_width]` in the variable's own
    /// (uncentered) coordinates.
    Fixed { half_width: f64 },
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy::Adaptive { sigmas: 10.0 }
    }
}

impl TruncationPolicy {
    /// Window for the centered variable `x - mean` with the given spread.
    pub fn centered_window(&self, mean: f64, std_dev: f64) -> Result<TruncationWindow> {
        match *self {
            TruncationPolicy::Adaptive { sigmas } => TruncationWindow::new(0.0, sigmas * std_dev),
            TruncationPolicy::Fixed { half_width } => TruncationWindow::new(-mean, half_width),
        }
    }
}

/// `int_{center - H}^{center + H} f(x) dx` through the substitution
/// `x = center + H p`, which turns the integral into a Chebyshev-weighted one
/// with integrand `H sqrt(1 - p^2) f(center + H p)`.
pub fn integrate_truncated(
    f: impl Fn(f64) -> f64,
    window: &TruncationWindow,
    rule: &ChebyshevRule,
) -> f64 {
    rule.mapped(window).map(|(x, w)| w * f(x)).sum()
}
