use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("value count {got} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, got: usize },
    #[error("{op}: expected length {expected}, got {got}")]
    LengthMismatch {
        op: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("requested {requested} modes but only {available} are available")]
    ModeCount { requested: usize, available: usize },
    #[error("signal of length {length} too short for level {level} (filter length {filter})")]
    SignalTooShort {
        level: usize,
        length: usize,
        filter: usize,
    },
    #[error("backward already ran on this tape")]
    DoubleBackward,
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("degenerate shape {0:?}")]
    DegenerateShape(Vec<usize>),
    #[error("{0}: produced a non-finite value")]
    NonFinite(&'static str),
    #[error("{0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, TensorError>;
