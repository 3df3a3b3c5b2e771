use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o: {0}")]
    Io(String),

    #[error(transparent)]
    Core(#[from] twinsearch::Error),

    /// The fast path disagreed with the reference computation.
    #[error("correctness failure: {0}")]
    Correctness(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Correctness(_) => 1,
            // bad arguments, unreadable or malformed input
            CliError::Usage(_) | CliError::Io(_) | CliError::Core(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
