use std::path::PathBuf;

use thiserror::Error;

/// Errors of the std layer: IO, formats, configuration and the Monte Carlo
/// lattice, plus everything the numerical core can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] holotel_core::Error),

    /// The real-space lattice does not resolve the pixel grid.
    #[error("lattice too coarse: {reason}")]
    GridTooCoarse { reason: String },

    #[error("bad image format in {path}: {reason}")]
    BadImageFormat { path: PathBuf, reason: String },

    /// Configuration problem; `key` is the dotted path of the offending entry.
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
