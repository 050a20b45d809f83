use std::path::PathBuf;

use hedon_core::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("input file not found: {}", .0.display())]
    MissingInput(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad invocations and invalid inputs, 1 for failures at run time.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::MissingInput(_) => 2,
            CliError::Io { .. } => 1,
            CliError::Core(e) => match e {
                Error::Validation(_)
                | Error::Config(_)
                | Error::Parse { .. }
                | Error::DuplicateId(_)
                | Error::UnknownId(_)
                | Error::VersionMismatch { .. }
                | Error::Corrupt(_) => 2,
                _ => 1,
            },
        }
    }
}
