use thiserror::Error;

/// Errors raised by the simulator core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error("threshold {0} is outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("speedup ratio is undefined for an empty exit histogram")]
    EmptyHistogram,

    #[error(
        "bandit state is not initialized: every arm must be played once (call initialize first)"
    )]
    Uninitialized,

    #[error("threshold {0} is not in the action set")]
    UnknownArm(f64),

    #[error("trace source exhausted after {got} tokens, {needed} required")]
    SourceExhausted { needed: usize, got: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite loss {loss} at epoch {epoch}")]
    NonFiniteLoss { epoch: usize, loss: f64 },

    #[error("model backbone is frozen")]
    Frozen,

    #[error("model backbone is not frozen; train the backbone first")]
    NotFrozen,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("unsupported format version {found} (expected {expected})")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
