use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}, line {line}: {reason}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        reason: String,
    },

    #[error(
        "{path}: product id {id:?} appears on line {first_line} and again on line {second_line}"
    )]
    DuplicateProduct {
        path: PathBuf,
        id: String,
        first_line: u64,
        second_line: u64,
    },

    #[error("{path}, line {line}: cannot parse timestamp {value:?}")]
    BadTimestamp {
        path: PathBuf,
        line: u64,
        value: String,
    },

    #[error("{path}, line {line}: sale has non-positive quantity {quantity}")]
    BadQuantity {
        path: PathBuf,
        line: u64,
        quantity: i64,
    },

    #[error("sale log is not sorted by (customer, timestamp) at event {index}")]
    UnsortedLog { index: usize },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{0}")]
    Degenerate(String),

    #[error("graph file: {0}")]
    GraphFormat(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config line {line}: {reason}")]
    Config { line: usize, reason: String },

    #[error("{stage} stage: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub trait StageContext<T> {
    /// Tags an error with the pipeline stage it came from.
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageContext<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| match e {
            Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        })
    }
}
