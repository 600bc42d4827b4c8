use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("loss became non-finite after reducing the learning rates")]
    NonFiniteLoss,

    #[error("no commonly valid depth pixels")]
    NoCommonValidPixels,

    #[error("exploration complete: no viewpoint nodes left in the tree")]
    ExplorationComplete,

    #[error("trapped: no collision-free primitive from the start state")]
    Trapped,

    #[error("unreachable: no trajectory candidate found")]
    Unreachable,

    #[error("exploration budget of {0} steps exhausted")]
    BudgetExhausted(usize),

    #[error("malformed snapshot: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
