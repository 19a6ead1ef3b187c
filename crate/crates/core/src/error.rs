//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in frame {frame} at pad {pad}")]
    NonFiniteInput { frame: usize, pad: usize },

    #[error("pad index {index} out of range (0..{count})")]
    IndexOutOfRange { index: usize, count: usize },

    #[error("invalid pose: {0}")]
    InvalidPose(String),

    #[error("no ambiguous pose pair found within the search budget")]
    NotFound,

    #[error("invalid dataset spec: {0}")]
    InvalidSpec(String),

    #[error("session split needs at least 2 sessions, got {0}")]
    TooFewSessions(usize),

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed row at line {line}, column {column}: {reason}")]
    MalformedRow {
        line: usize,
        column: usize,
        reason: String,
    },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },

    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("singular ridge system (lambda fallback exhausted at {lambda})")]
    SingularSystem { lambda: f64 },

    #[error("config: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
