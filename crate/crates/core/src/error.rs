use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A record does not conform to the input schema or catalog.
    #[error("schema error at row {row}: {message}")]
    Schema { row: usize, message: String },

    #[error("conflicting records for individual {individual} at time {time}")]
    Conflict { individual: String, time: i64 },

    #[error("individual {individual} has a gap in its timeline between ticks {from} and {to}")]
    Gap { individual: String, from: i64, to: i64 },

    #[error("invalid catalog: {0}")]
    Catalog(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("series too short: {0}")]
    TooShort(String),

    #[error("empty series")]
    EmptySeries,

    #[error("invalid window: {0}")]
    Window(String),

    #[error("non-finite loss at batch index {index}")]
    NonFinite { index: usize },

    #[error("training diverged at offset {offset}, epoch {epoch}; last finite parameters kept")]
    Diverged {
        offset: usize,
        epoch: usize,
        checkpoint: Box<crate::inference::PredictorParams>,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("catalog mismatch: parameters were trained against catalog {expected}, got {found}")]
    CatalogMismatch { expected: String, found: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input rather than a fault in the program.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::NonFinite { .. })
    }
}
