//! Outage analysis of a RIS-assisted link received by a fluid antenna that
//! switches to its strongest port.
//!
//! Three analytical estimators are provided: a full multivariate-Gaussian
//! (CLT) evaluation, a block-correlation evaluation built from nested 1-D
//! Gauss-Chebyshev rules, and an i.i.d.-blocks limit. A Monte Carlo simulator
//! of the physical channel serves as ground truth, and the [`cli`] module
//! drives parameter sweeps.

pub mod cli;
pub mod corr;
pub mod error;
pub mod moments;
pub mod outage;
pub mod quad;
pub mod sim;
pub mod system;

pub use error::{Error, Result};
pub use system::{SystemConfig, ThresholdRule};
