//! CLI error kinds mapped to process exit codes.

use std::fmt;

#[derive(Debug)]
pub enum CliError {
    /// Config could not be parsed; exit code 2.
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    /// Model too large for the requested engine; exit code 3.
    TooLarge(String),
    /// Anything else; exit code 1.
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse { .. } => 2,
            CliError::TooLarge(_) => 3,
            CliError::Other(_) => 1,
        }
    }

    pub fn other(message: impl Into<String>) -> CliError {
        CliError::Other(message.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse {
                path,
                line,
                column,
                message,
            } => write!(f, "{path}:{line}:{column}: {message}"),
            CliError::TooLarge(msg) => write!(f, "model too large: {msg}"),
            CliError::Other(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<declab_core::Error> for CliError {
    fn from(err: declab_core::Error) -> CliError {
        match err {
            declab_core::Error::TooManySites(msg) => CliError::TooLarge(msg),
            other => CliError::Other(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> CliError {
        CliError::Other(err.to_string())
    }
}
