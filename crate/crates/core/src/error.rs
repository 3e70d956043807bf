use thiserror::Error;

/// Errors produced by the NNCA library.
#[derive(Debug, Error)]
pub enum NncaError {
    #[error("empty point set")]
    EmptyPointSet,
    #[error("invalid leaf capacity: {0} (must be at least 1)")]
    InvalidLeafCapacity(usize),
    #[error("invalid admissibility parameter eta = {0} (must be positive)")]
    InvalidEta(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("index ({row}, {col}) out of range for a {rows} x {cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("unknown kernel '{name}'; valid kernels are: {valid}")]
    UnknownKernel { name: String, valid: String },
    #[error("vector length {actual} does not match operator size {expected}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("reference vector has zero norm")]
    ZeroReference,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, NncaError>;
