use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("forward-pass budget exhausted ({used} of {cap} used, {requested} requested)")]
    BudgetExhausted { used: u64, cap: u64, requested: u64 },

    #[error("loss is not finite")]
    NonFiniteLoss,

    #[error("network state diverged at step {step}")]
    Divergence { step: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("empty input")]
    EmptyInput,

    #[error("timestamps not strictly increasing at row {index}")]
    UnsortedTimestamps { index: usize },

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("non-positive price on line {line}")]
    NonPositivePrice { line: usize },

    #[error("series of length {len} is too short for {lags} lags")]
    InsufficientLength { len: usize, lags: usize },

    #[error("non-stationary generator: phi + gamma = {sum} >= 1")]
    NonStationary { sum: f64 },

    #[error("budget parity violated: {0}")]
    BudgetParity(String),

    #[error("not implemented: {0}")]
    Unsupported(String),

    #[error("every search trial diverged")]
    AllTrialsDiverged,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }
}
