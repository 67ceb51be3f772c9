use thiserror::Error;

/// Errors produced by the selection, sampling and simulation layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A sensor id outside the universe was passed to an operation.
    #[error("unknown sensor id {id}: universe has {n} sensors")]
    UnknownSensor { id: usize, n: usize },

    /// A probability vector failed validation (negative mass, wrong sum, ...).
    #[error("invalid probability vector: {0}")]
    InvalidDistribution(String),

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An exhaustive check was requested on a universe too large to enumerate.
    #[error("universe too large: n={n} exceeds limit {max} for exhaustive checking")]
    UniverseTooLarge { n: usize, max: usize },

    /// A covariance matrix is not symmetric positive definite.
    #[error("covariance is not symmetric positive definite: {0}")]
    NotPositiveDefinite(String),

    /// A message primitive was used that the communication model forbids.
    #[error("communication model violation: {0}")]
    ModelViolation(String),

    /// A run configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
