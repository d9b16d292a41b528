use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the notesforge pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{context}, line {line}: {message}")]
    Parse {
        context: String,
        line: usize,
        message: String,
    },
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("duplicate note ids: {}", .0.join(", "))]
    DuplicateNoteIds(Vec<String>),
    #[error("{count} record(s) dated after as-of date {as_of}: first is {first}")]
    Leakage {
        as_of: chrono::NaiveDate,
        count: usize,
        first: String,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("token `{0}` is not in the vocabulary")]
    UnknownToken(String),
    #[error("word `{0}` has zero window count")]
    ZeroCount(String),
    #[error("need at least two distinct scorable words, got {0}")]
    TooFewWords(usize),
    #[error("zero vector has no direction")]
    ZeroVector,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("class {class} has {count} samples, fewer than {folds} folds")]
    TooFewPerClass { class: u8, count: usize, folds: usize },
    #[error("missing labels for clients: {}", .0.join(", "))]
    MissingLabels(Vec<String>),
    #[error("missing note metadata for: {}", .0.join(", "))]
    MissingMetadata(Vec<String>),
    #[error("unsupported model file: {0}")]
    ModelFormat(String),
    #[error("k={k}: {source}")]
    AtTopicCount {
        k: usize,
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

    pub(crate) fn parse(context: impl Into<String>, line: usize, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            line,
            message: message.to_string(),
        }
    }

    /// Coarse category used by the command line to choose an exit code.
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Input,
            Error::Parse { .. }
            | Error::Schema(_)
            | Error::DuplicateNoteIds(_)
            | Error::Leakage { .. }
            | Error::MissingLabels(_)
            | Error::MissingMetadata(_)
            | Error::ModelFormat(_)
            | Error::Dimension { .. } => ErrorCategory::Schema,
            Error::AtTopicCount { source, .. } => source.category(),
            _ => ErrorCategory::Usage,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Input,
    Schema,
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
