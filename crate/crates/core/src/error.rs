use thiserror::Error;

/// Errors raised across the aggregation library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),

    #[error("Jacobi iteration did not converge after {sweeps} sweeps (off-diagonal {off:e})")]
    NoConvergence { sweeps: usize, off: f64 },

    #[error("columns are linearly dependent (column {0})")]
    DependentColumns(usize),

    #[error("zero gradient for worker {0}")]
    ZeroGradient(usize),

    #[error("all gradients are zero")]
    DegenerateInput,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("too few workers: {0}")]
    TooFewWorkers(String),

    #[error("bad attack spec: {0}")]
    BadSpec(String),

    #[error("state overflow at t = {0}")]
    Overflow(f64),

    #[error("zero matrix cannot be normalized")]
    ZeroMatrix,

    #[error("step size fell below {0:e} without progress")]
    StepTooSmall(f64),

    #[error("iteration {iter}: {source}")]
    AtIteration { iter: usize, source: Box<Error> },

    #[error("io: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
