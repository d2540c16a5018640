use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("message {0} has no body after cleaning")]
    EmptyMessage(String),
    #[error("csv schema error in {path}: {reason}")]
    CsvSchema { path: PathBuf, reason: String },
    #[error("invalid corpus spec: {0}")]
    InvalidCorpusSpec(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid lexicon entry {entry:?} in {list}: {reason}")]
    InvalidLexicon {
        list: &'static str,
        entry: String,
        reason: String,
    },
    #[error("no positive examples survived the filter cascade")]
    EmptyDataset,
    #[error("split ratios are invalid: {0}")]
    Ratio(String),
    #[error("cannot fit a vocabulary on an empty corpus")]
    EmptyCorpus,
    #[error("gini impurity is undefined for an empty node")]
    DegenerateNode,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no embedding for example {0}")]
    MissingEmbedding(String),
    #[error("embedding backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("embedding dimension drifted from {expected} to {got}")]
    DimensionDrift { expected: usize, got: usize },
    #[error("embedding protocol error: {0}")]
    Protocol(String),
    #[error("length mismatch: {0} predictions vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("malformed {what}: {reason}")]
    Format { what: String, reason: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, reason: impl ToString) -> Self {
        Error::Format {
            what: what.into(),
            reason: reason.to_string(),
        }
    }
}
