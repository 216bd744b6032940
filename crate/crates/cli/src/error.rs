use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] chaingraph::Error),

    #[error("{0}")]
    Usage(String),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// 2 for invalid input, 3 for numerical failure, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        use chaingraph::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 4,
            CliError::Core(e) => match e {
                E::NonConvergence(_) | E::BootstrapFailure { .. } => 3,
                E::Io(_) => 4,
                E::Csv(c) if matches!(c.kind(), csv::ErrorKind::Io(_)) => 4,
                _ => 2,
            },
        }
    }
}
