use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Caller supplied an id, class, or parameter outside its domain.
    #[error("invalid input: {0}")]
    Input(String),

    /// A score matrix, score file, or label file failed validation.
    #[error("format error: {0}")]
    Format(String),

    /// Every example in the pool is already labeled.
    #[error("pool exhausted: no unlabeled examples remain")]
    PoolExhausted,

    /// Graph order cannot grow past N - 1.
    #[error("graph order exhausted: cannot raise order to {requested} on a pool of {n}")]
    OrderExhausted { requested: usize, n: usize },

    /// A score provider returned a matrix whose shape disagrees with the pool.
    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
