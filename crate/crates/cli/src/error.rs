use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error in `{field}`: {reason}")]
    Config { field: String, reason: String },
    #[error("missing artifact {}", .0.display())]
    MissingArtifact(PathBuf),
    #[error(transparent)]
    Core(#[from] mimofb::Error),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CliError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// 0 success, 2 config, 3 missing artifact, 4 numerical failure, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::MissingArtifact(_) => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(mimofb::Error::InvalidParameter { .. }) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
