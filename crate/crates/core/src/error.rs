use num_complex::Complex64;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("capacity exceeded: {requested} entries requested, cap is {cap}")]
    Capacity { requested: u64, cap: u64 },

    #[error("shape error: {0}")]
    Shape(String),

    #[error(
        "power iteration did not converge after {iterations} iterations (estimate {estimate}, residual {residual:e})"
    )]
    Convergence {
        iterations: usize,
        estimate: f64,
        residual: f64,
        iterate: Vec<Complex64>,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("limit exceeded: {0}")]
    Limit(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("insufficient signal: {admissible} admissible points above noise floor {noise_floor:e}, need 4")]
    InsufficientSignal { admissible: usize, noise_floor: f64 },

    #[error("internal consistency error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical procedure rather than of the input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Convergence { .. } | Error::InsufficientSignal { .. })
    }
}
