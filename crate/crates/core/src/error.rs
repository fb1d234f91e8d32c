use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("row {row}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: duplicate sample id `{id}`")]
    DuplicateId { row: usize, id: String },

    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("row {row}: non-finite value in sample `{id}`")]
    NonFinite { row: usize, id: String },

    #[error("embedding set is empty")]
    EmptySet,

    #[error("sample `{0}` has a zero vector")]
    ZeroVector(String),

    #[error("writer `{0}` appears in both train and test splits")]
    WriterOverlap(String),

    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVM weight vector is all zeros")]
    ZeroWeights,

    #[error("no query has a relevant candidate")]
    NoValidQueries,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("consistency check failed: {0}")]
    Consistency(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 for rejected input, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
            Error::Io { .. }
            | Error::Consistency(_)
            | Error::ZeroWeights
            | Error::NoValidQueries => 1,
            _ => 2,
        }
    }
}
