use thiserror::Error;

/// Exit status for usage and configuration errors.
pub const EXIT_USAGE: u8 = 1;
/// Exit status for numerical failures: failed identity checks, divergence,
/// majorant violations.
pub const EXIT_NUMERICAL: u8 = 2;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] wosno::Error),
}

impl CliError {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::CheckFailed(_) => EXIT_NUMERICAL,
            CliError::Core(e) if e.is_numerical() => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
