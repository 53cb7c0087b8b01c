//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on a mathematical operation failed.
    #[error("domain error: {0}")]
    Domain(String),

    /// A simulation run could not continue (truncation, mass drift, step cap).
    #[error("run aborted: {0}")]
    Run(String),

    /// Malformed key=value configuration input.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed density snapshot file.
    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
