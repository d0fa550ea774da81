use thiserror::Error;

/// Command failure, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad invocation or invalid config; exit status 2.
    #[error("{0}")]
    Usage(String),
    /// Failure while running a valid command; exit status 1.
    #[error(transparent)]
    Runtime(#[from] anyhow::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Usage(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<vitd_core::Error> for CliError {
    fn from(e: vitd_core::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
