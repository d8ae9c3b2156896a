use std::fmt;
use std::path::Path;

use exiffi_core::Error;

/// Failure of a subcommand, tagged with the process exit code it maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or argument values: exit 1.
    Usage(String),
    /// Unreadable, malformed or incompatible inputs: exit 2.
    Data(String),
    /// A bug or an impossible state: exit 3.
    Internal(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Data(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Internal(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Domain(_) | Error::Rank(_) | Error::Grid(_) | Error::Index(_) => CliError::Usage(msg),
            Error::State(_) => CliError::Internal(msg),
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::Shape { .. }
            | Error::Degenerate(_)
            | Error::Version { .. }
            | Error::Corruption(_)
            | Error::Partition(_)
            | Error::Label(_) => CliError::Data(msg),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(format!("json: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;
