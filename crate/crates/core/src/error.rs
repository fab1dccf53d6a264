use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("set schema error in {record}: {message}")]
    Schema { record: String, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("illegal pick at seat {seat}: card {card} is not in the current pack")]
    IllegalPick { seat: usize, card: usize },

    #[error("draft is already finished")]
    DraftFinished,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid log {draft_id} (pick {pick}): {message}")]
    Validation {
        draft_id: String,
        pick: usize,
        message: String,
    },

    #[error("unknown card names: {}", .0.join(", "))]
    UnknownCards(Vec<String>),

    #[error("set mismatch: expected {expected}, found {found}")]
    SetMismatch { expected: String, found: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("corrupt model container: {0}")]
    CorruptModel(String),

    #[error("unsupported model container version {0}")]
    ModelVersion(u32),

    #[error("non-finite gradient in layer {0}")]
    NonFinite(String),

    #[error("unknown agent spec '{0}'")]
    UnknownAgent(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
