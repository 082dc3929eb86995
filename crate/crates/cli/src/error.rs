use thiserror::Error;

/// Failures of a run, split by exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at `{pointer}`: {message}")]
    Config { pointer: String, message: String },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numerical(#[from] hadamard::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// 2 for usage and config problems, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Usage(_) => 2,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }
}
