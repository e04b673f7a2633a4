use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("duplicate vocabulary entry '{word}' at line {line}")]
    DuplicateVocab { word: String, line: usize },

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("refusing to materialize {n}x{n} Gram matrices (limit {limit})")]
    OracleGuard { n: usize, limit: usize },

    #[error("pair ({left}, {right}): {source}")]
    Pair {
        left: String,
        right: String,
        #[source]
        source: Box<Error>,
    },

    #[error("corpus error: {0}")]
    Corpus(String),
}

impl Error {
    pub(crate) fn in_pair(self, left: &str, right: &str) -> Self {
        Error::Pair {
            left: left.to_string(),
            right: right.to_string(),
            source: Box::new(self),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
