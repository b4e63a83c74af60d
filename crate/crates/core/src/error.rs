use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e} > tolerance {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("decomposition failed: {0}")]
    Decomposition(String),

    #[error("design matrix is rank deficient (smallest singular value {sigma_min:e})")]
    RankDeficient { sigma_min: f64 },

    #[error("conjugate gradient did not converge in {iterations} iterations (relative residual {residual:e})")]
    SolverNonConvergence { iterations: usize, residual: f64 },

    #[error("iteration diverged at step {iteration} (norm {norm:e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("dimension {n} exceeds the dense threshold {threshold}; use the Crank-Nicolson linear mode")]
    DenseThresholdExceeded { n: usize, threshold: usize },

    #[error("explicit step {step} is unstable for stiffness {stiffness:e}")]
    UnstableStep { step: f64, stiffness: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Failures of the numerics themselves, as opposed to bad input or I/O.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Decomposition(_)
                | Error::RankDeficient { .. }
                | Error::SolverNonConvergence { .. }
                | Error::Divergence { .. }
                | Error::UnstableStep { .. }
                | Error::NonFinite(_)
        )
    }
}
