use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Runtime(String),
    #[error("certification failed: {0}")]
    Certification(String),
    #[error("cannot access {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) | CliError::Io { .. } => 3,
            CliError::Certification(_) => 4,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> CliError {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }
}

impl From<nhstab_core::Error> for CliError {
    fn from(e: nhstab_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<nhstab_core::EvalError> for CliError {
    fn from(e: nhstab_core::EvalError) -> Self {
        CliError::Config(e.to_string())
    }
}
