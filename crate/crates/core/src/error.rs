use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("vocabulary is empty (min_count = {min_count})")]
    EmptyVocabulary { min_count: usize },

    #[error("document {doc_id:?} has no in-vocabulary tokens")]
    EmptyDocument { doc_id: String },

    #[error("class index {index} out of range for {k} classes")]
    ClassIndex { index: usize, k: usize },

    #[error("invalid label: {0}")]
    InvalidLabel(String),

    #[error("class {class:?} has a zero denominator; use smoothing_alpha > 0")]
    ZeroDenominator { class: String },

    #[error("t must be > 1 for this estimator (got {0})")]
    InvalidT(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {class:?} has {count} documents; at least {needed} are required")]
    TooFewDocuments {
        class: String,
        count: usize,
        needed: usize,
    },

    #[error("vocabulary mismatch: model {model_hash} vs data {data_hash}")]
    VocabularyMismatch {
        model_hash: String,
        data_hash: String,
    },

    #[error("trial {trial} (seed {seed}) failed: {source}")]
    Trial {
        trial: u64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
