use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or construction preconditions.
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] soficlab::Error),
    /// A malformed input file.
    #[error("{}: {source}", path.display())]
    Input { path: PathBuf, source: soficlab::Error },
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    /// A declared verification or defect gate did not pass.
    #[error("gate failed: {0}")]
    Gate(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Gate(_) => 1,
            CliError::Invalid(_) | CliError::Core(_) | CliError::Input { .. } => 2,
            CliError::Io { .. } => 3,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
