use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("corpus is empty after filtering ({dropped} documents dropped)")]
    EmptyCorpus { dropped: usize },

    #[error("document {id} has no date but a chronological split was requested")]
    MissingDate { id: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: predicted has {predicted} items, gold has {gold}")]
    LengthMismatch { predicted: usize, gold: usize },

    #[error("not a permutation: {0:?}")]
    NotPermutation(Vec<usize>),

    #[error("dimension error in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("floor rule: document {id} cannot drop below 2 sequences")]
    FloorRule { id: String },

    #[error("training diverged at epoch {epoch} (loss = {loss})")]
    Diverged { epoch: usize, loss: f64 },

    #[error("undefined statistic: {0}")]
    Undefined(String),

    #[error("rating {rating} on row {row} is outside the 1..=5 scale")]
    RatingOutOfRange { row: usize, rating: f64 },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dim(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Dimension {
            op,
            detail: detail.into(),
        }
    }
}
