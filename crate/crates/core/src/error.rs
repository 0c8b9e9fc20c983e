use thiserror::Error;

/// Errors produced by the numerical layers of the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid modulus: {0}")]
    InvalidModulus(String),

    #[error("modulus is not Dini integrable: {0}")]
    Divergent(String),

    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrability exponent q = {q} must exceed the dimension {n}")]
    Exponent { q: f64, n: usize },

    #[error("anisotropy ratio {ratio:.4} exceeds the supported limit {limit}")]
    Anisotropy { ratio: f64, limit: f64 },

    #[error("linear solver did not converge in {iterations} iterations (final relative residual {final_residual:.3e})")]
    Solver {
        iterations: usize,
        final_residual: f64,
        /// Relative residual after every iteration.
        history: Vec<f64>,
    },

    #[error("fixed-point iteration failed after {steps} steps: {reason}")]
    FixedPoint {
        steps: usize,
        reason: String,
        /// Sup-norm difference between consecutive iterates.
        history: Vec<f64>,
    },

    #[error("polynomial fit failed: {0}")]
    Fit(String),

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("configuration error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("unknown registry id `{0}`")]
    Registry(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
