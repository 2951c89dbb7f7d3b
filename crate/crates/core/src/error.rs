use thiserror::Error;

/// Errors raised by the counting-statistics engine.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FcsError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("counting field has {len} entries but the model uses tag {tag}")]
    CountingFieldTooShort { len: usize, tag: usize },

    #[error("stationary kernel has dimension {dim}, expected 1")]
    DegenerateKernel { dim: usize },

    #[error("model is time dependent; a static generator is required")]
    NotStatic,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("counting-field grid is not uniform or N is not a power of two: {0}")]
    InvalidGrid(String),

    #[error("distribution check failed: {0}")]
    Normalization(String),

    #[error("stationary emission intensity vanishes")]
    ZeroIntensity,

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, FcsError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> FcsError {
    FcsError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
