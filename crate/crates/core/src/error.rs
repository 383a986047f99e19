use thiserror::Error;

/// Errors raised by the simulation kernels and builders.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhaseLabError {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("index {index} out of range for dimension {dim}")]
    Index { index: usize, dim: usize },

    #[error("unknown register label `{0}`")]
    Label(String),

    #[error("duplicate register label `{0}`")]
    DuplicateLabel(String),

    #[error("vector norm {norm} is not 1 (tolerance {tolerance})")]
    Normalization { norm: f64, tolerance: f64 },

    #[error("matrix is not unitary: max |U^dagger U - I| = {deviation:e}")]
    NotUnitary { deviation: f64 },

    #[error("non-finite amplitude encountered")]
    NonFinite,

    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T> = std::result::Result<T, PhaseLabError>;
