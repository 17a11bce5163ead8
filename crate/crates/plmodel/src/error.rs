use thiserror::Error;

/// Crate-wide error type. Variants are grouped by how the command-line
/// front end reports them: I/O and malformed files, invalid configuration
/// or geometry, and model-training failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse: {0}")]
    Parse(String),

    #[error("schema: {0}")]
    Schema(String),

    #[error("validation: {0}")]
    Validation(String),

    #[error("domain: {0}")]
    Domain(String),

    #[error("training: {0}")]
    Training(String),

    #[error("acceptance gate failed: {0}")]
    GateFailed(String),
}

impl Error {
    /// Process exit code for the CLI: 1 for I/O and malformed inputs,
    /// 2 for validation failures (including failed reproduction gates),
    /// 3 for training failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) | Error::Parse(_) | Error::Schema(_) => 1,
            Error::Validation(_) | Error::Domain(_) | Error::GateFailed(_) => 2,
            Error::Training(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
