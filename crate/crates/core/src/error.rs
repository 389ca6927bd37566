use thiserror::Error;

/// Errors produced by the dichotomy library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("function undefined at eigenvalue {eigenvalue:e}")]
    Domain { eigenvalue: f64 },

    #[error("eigensolver did not converge for a {dim}x{dim} matrix within {cap} iterations")]
    NoConvergence { dim: usize, cap: usize },

    #[error("dimension {dim} exceeds the configured cap {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(
        "rate {rate} lies within the near-critical band around {critical} \
         (lambda1 = {lambda1}, lambda2 = {lambda2})"
    )]
    NearCritical {
        rate: f64,
        critical: f64,
        lambda1: f64,
        lambda2: f64,
    },

    #[error("semidefinite program rejected: {0}")]
    InvalidProblem(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn arg(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
