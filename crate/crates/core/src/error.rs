use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("dimension {0} exceeds the supported maximum")]
    DimensionTooLarge(usize),

    #[error("factor level {0} is outside [1, 8]")]
    LevelOutOfRange(usize),

    #[error("bias alpha = {0} is outside (0, 1/2]")]
    InvalidAlpha(f64),

    #[error("exponent p = {0} is not in [1, inf]")]
    InvalidExponent(f64),

    #[error("index {index} is out of range at level {level} (limit {limit})")]
    IndexOutOfLevel {
        index: usize,
        level: usize,
        limit: usize,
    },

    #[error("filtration step {step} is outside [{min}, {max}]")]
    StepOutOfRange { step: i64, min: i64, max: i64 },

    #[error("matrix is not Hermitian (residual {0:e})")]
    NotHermitian(f64),

    #[error("matrix is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("matrix is singular; the requested power needs an inverse")]
    Singular,

    #[error("matrix is not diagonal (off-diagonal magnitude {0:e})")]
    NotDiagonal(f64),

    #[error("coefficient array has length {found}, expected {expected}")]
    BadLength { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
