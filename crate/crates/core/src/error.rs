use thiserror::Error;

pub type Result<T> = std::result::Result<T, FxError>;

/// Every failure the forecasting engine can report.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FxError {
    #[error("dimension mismatch in {op}: left is {left:?}, right is {right:?}")]
    Dimension {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("no data rows")]
    NoDataRows,

    #[error("duplicate timestamp {timestamp} at line {line}")]
    DuplicateTimestamp { line: u64, timestamp: String },

    #[error("line {line}: close must be positive and finite, got {value}")]
    NonPositiveClose { line: u64, value: f64 },

    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("cannot fit scaler: maximum equals minimum ({0})")]
    DegenerateScaler(f64),

    #[error("series too short: need at least {required} values, got {actual}")]
    SeriesTooShort { required: usize, actual: usize },

    #[error("split of {n} samples at fraction {fraction} leaves the {side} side empty")]
    EmptySplit {
        n: usize,
        fraction: f64,
        side: &'static str,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value in {param} at time step {step}")]
    NonFinite { param: String, step: usize },

    #[error("training diverged at epoch {epoch}: mse {mse:e} vs initial {initial:e}")]
    Divergence {
        epoch: usize,
        mse: f64,
        initial: f64,
    },

    #[error("length mismatch: predictions {pred}, truth {truth}")]
    LengthMismatch { pred: usize, truth: usize },

    #[error("metric over an empty sample")]
    EmptySample,

    #[error("truth value at index {0} is zero; MAPE undefined")]
    ZeroTruth(usize),

    #[error("incomplete error table, missing cells: {}", .0.join(", "))]
    IncompleteGrid(Vec<String>),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for FxError {
    fn from(e: std::io::Error) -> Self {
        FxError::Io(e.to_string())
    }
}
