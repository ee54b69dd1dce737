use fxcast_core::FxError;
use thiserror::Error;

/// Failure classes of the command-line tool, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training diverged: {0}")]
    Divergence(String),
    #[error("i/o: {0}")]
    Io(String),
}

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const USAGE: i32 = 2;
    pub const DATA: i32 = 3;
    pub const DIVERGENCE: i32 = 4;
    pub const IO: i32 = 5;
    /// `compare` finished but at least one cell failed.
    pub const PARTIAL: i32 = 6;
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) => exit::USAGE,
            CliError::Data(_) => exit::DATA,
            CliError::Divergence(_) => exit::DIVERGENCE,
            CliError::Io(_) => exit::IO,
        }
    }

    /// Prefixes the message with `context`, keeping the class.
    pub fn context(self, context: &str) -> CliError {
        match self {
            CliError::Usage(m) => CliError::Usage(format!("{context}: {m}")),
            CliError::Config(m) => CliError::Config(format!("{context}: {m}")),
            CliError::Data(m) => CliError::Data(format!("{context}: {m}")),
            CliError::Divergence(m) => CliError::Divergence(format!("{context}: {m}")),
            CliError::Io(m) => CliError::Io(format!("{context}: {m}")),
        }
    }
}

impl From<FxError> for CliError {
    fn from(e: FxError) -> Self {
        let msg = e.to_string();
        match e {
            FxError::Config(_) => CliError::Config(msg),
            FxError::Divergence { .. } | FxError::NonFinite { .. } => CliError::Divergence(msg),
            FxError::Io(_) => CliError::Io(msg),
            _ => CliError::Data(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
