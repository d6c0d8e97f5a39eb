//! Numerical kernels: normal-distribution special functions, Gauss-Chebyshev
//! quadrature over truncated windows, the multivariate normal CDF and PSD
//! matrix square roots.

mod chebyshev;
mod factor;
mod mvn;
mod normal;

pub use chebyshev::{
    integrate_truncated, ChebyshevRule, TruncationPolicy, TruncationWindow, DEFAULT_CHEBYSHEV_NODES,
};
pub use factor::{psd_sqrt, PsdFactor};
pub use mvn::{mvn_cdf, MvnEstimate, MvnProblem, DEFAULT_MVN_POINTS, DEFAULT_MVN_REPLICATES};
pub use normal::{erf, erfc, normal_cdf, normal_pdf, normal_quantile};
