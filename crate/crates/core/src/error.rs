use std::path::PathBuf;

use thiserror::Error;

/// Errors produced across the toolkit.
///
/// Variants map onto the failure classes the pipeline distinguishes: malformed
/// files, broken data invariants, bad ranges or parameters, and shape or
/// architecture mismatches.
#[derive(Debug, Error)]
pub enum Error {
    #[error("format error: {0}")]
    Format(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("range error: {0}")]
    Range(String),

    #[error("parameter error: {0}")]
    Param(String),

    #[error("value error: {0}")]
    Value(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("rank error: data rank {rank} is below the requested {requested} endmembers")]
    Rank { rank: usize, requested: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
