use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("zero polynomial")]
    ZeroPolynomial,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("improper transfer function: numerator degree {num} exceeds denominator degree {den}")]
    Improper { num: usize, den: usize },

    #[error("acausal discrete-time filter: numerator degree {num} exceeds denominator degree {den}")]
    Acausal { num: usize, den: usize },

    #[error("denominator has a root at the origin and cannot be normalized to A(0) = 1")]
    RootAtOrigin,

    #[error("parameter vector length {got} does not match structure (expected {expected})")]
    LengthMismatch { expected: usize, got: usize },

    #[error("signal mismatch: {0}")]
    SignalMismatch(String),

    #[error("submodel {submodel} has an unstable denominator")]
    UnstableModel { submodel: usize },

    #[error("closed loop is unstable; offending pole moduli {moduli:?}")]
    UnstableClosedLoop { moduli: Vec<f64> },

    #[error("modified normal matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("non-finite values encountered at iteration {iteration}")]
    NonFinite { iteration: usize },

    #[error("partial-fraction factoring failed: {0}")]
    Factoring(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
