use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GmfgError {
    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid state-action space: {0}")]
    InvalidSpace(String),
    #[error("invalid graphon: {0}")]
    InvalidGraphon(String),
    #[error("not a probability vector: {0}")]
    NotSimplex(String),
    #[error("regularization weight must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("regularization weight must be nonnegative, got {0}")]
    NegativeLambda(f64),
    #[error("zero-probability action {action} at (cell {cell}, step {step}, state {state}) with positive regularization")]
    ZeroProbability {
        cell: usize,
        step: usize,
        state: usize,
        action: usize,
    },
    #[error("not a bijection on {len} cells: {reason}")]
    NotBijection { len: usize, reason: String },
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("oracle failed at iteration {iteration}: {message}")]
    Oracle { iteration: usize, message: String },
}

pub type Result<T, E = GmfgError> = std::result::Result<T, E>;
