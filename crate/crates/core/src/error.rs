use thiserror::Error;

/// Errors raised across the completion toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("mode {mode} out of range for order-{order} tensor")]
    ModeOutOfRange { mode: usize, order: usize },
    #[error("index {index:?} out of range for dims {dims:?}")]
    IndexOutOfRange { index: Vec<usize>, dims: Vec<usize> },
    #[error("invalid dims: {0}")]
    InvalidDims(String),
    #[error("invalid rank chain: {0}")]
    InvalidRanks(String),
    #[error("invalid permutation {0:?}")]
    InvalidPermutation(Vec<usize>),
    #[error("invalid tensorization plan: {0}")]
    InvalidPlan(String),
    #[error("invalid weight tensor: {0}")]
    InvalidMask(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("no observed entries")]
    EmptyObservedSet,
    #[error("reference tensor has zero norm")]
    ZeroNorm,
    #[error("tensor has zero value range")]
    ZeroRange,
    #[error("solver diverged at iteration {iteration} (objective {objective})")]
    Diverged { iteration: usize, objective: f64 },
    #[error("malformed file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
