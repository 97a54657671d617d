use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
///
/// The variants line up with the CLI exit codes: input problems map to 2,
/// ingestion problems to 3 and broken internal invariants to 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments, shapes or configuration.
    #[error("input error: {0}")]
    Input(String),

    /// Noise rate requested on a graph without edges.
    #[error("noise rate is undefined for a graph with no edges")]
    UndefinedRate,

    /// A dataset file is missing or could not be decoded.
    #[error("ingestion error in {}: {message}", path.display())]
    Ingestion { path: PathBuf, message: String },

    /// A cache/parameter mismatch or another broken invariant.
    #[error("internal error: {0}")]
    Internal(String),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn ingestion(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
