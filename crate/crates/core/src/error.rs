use std::path::PathBuf;

/// Errors produced by the analysis, simulation and harness layers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid {field}: {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("matrix is not positive semidefinite: eigenvalue {min_eigenvalue:e} is below -{tolerance:e}")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("symmetric eigensolver did not converge for order {order} within {max_iterations} iterations")]
    EigenNoConvergence { order: usize, max_iterations: usize },

    #[error("cannot split {ports} ports into {blocks} blocks")]
    InfeasibleBlocks { ports: usize, blocks: usize },

    #[error("block decomposition needs rho0 < rho1 < 1, got rho0 = {rho0}, rho1 = {rho1}")]
    DegenerateBlockCorrelation { rho0: f64, rho1: f64 },

    #[error("covariance could not be factorized: {0}")]
    Factorization(String),

    #[error("simulation needs at least one trial")]
    NoTrials,

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{}: {source}", path.display())]
    Config {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NotPsd { .. } => "not_psd",
            Error::EigenNoConvergence { .. } => "eigen_no_convergence",
            Error::InfeasibleBlocks { .. } => "infeasible_blocks",
            Error::DegenerateBlockCorrelation { .. } => "degenerate_block_correlation",
            Error::Factorization(_) => "factorization",
            Error::NoTrials => "no_trials",
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::Config { .. } => "config",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
