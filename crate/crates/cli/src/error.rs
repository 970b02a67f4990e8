use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or missing arguments; nothing was computed.
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Estimator(#[from] qgrad::Error),

    #[error("{0}")]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    /// An asserted inequality failed during a verification sweep.
    #[error("{0}")]
    Assertion(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
