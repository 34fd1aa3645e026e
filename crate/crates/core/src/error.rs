use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data.
    #[error("input error: {0}")]
    Input(String),

    /// Invalid configuration or argument combination.
    #[error("config error: {0}")]
    Config(String),

    #[error("missing column `{column}` in {path}")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: unknown label `{label}`")]
    UnknownLabel { path: PathBuf, line: u64, label: String },

    #[error("{path}:{line}: undeclared group `{group}`")]
    UnknownGroup { path: PathBuf, line: u64, group: String },

    #[error("{path}: file contains no data rows")]
    EmptyFile { path: PathBuf },

    #[error("{path}: fold indices must be contiguous from 0, found {found:?}")]
    NonContiguousFolds { path: PathBuf, found: Vec<usize> },

    #[error("{path}:{line}: negative cell `{cell}` = {value}")]
    NegativeCell { path: PathBuf, line: u64, cell: String, value: f64 },

    #[error("{path}: duplicate entry for fold {fold}, group `{group}`")]
    DuplicateEntry { path: PathBuf, fold: usize, group: String },

    /// Every sample of a column was flagged as undefined.
    #[error("no defined samples for `{0}`")]
    EmptySummary(String),

    #[error("training diverged in fold {fold}: {reason}")]
    Divergence { fold: usize, reason: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// True for errors caused by the caller's data or flags rather than the environment.
    pub fn is_usage(&self) -> bool {
        !matches!(self, Error::Io { .. } | Error::Divergence { .. })
    }
}
