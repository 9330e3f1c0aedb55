use std::fmt;
use std::io;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration: bad dimensions, violated invariants, unknown keys.
    Config(String),
    /// Invalid runtime input: shape mismatches, empty batches.
    Input(String),
    /// Non-finite values encountered during training or updates.
    Numeric(String),
    /// Filesystem failures while writing or reading run artifacts.
    Io(io::Error),
    /// Checkpoint decode failures: bad magic, version or checksum mismatch, truncation.
    Checkpoint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Numeric(msg) => write!(f, "numeric error: {msg}"),
            Error::Io(err) => write!(f, "i/o error: {err}"),
            Error::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(err) => Some(err),
            _ => None,
        }
    }
}

impl From<io::Error> for Error {
    fn from(err: io::Error) -> Self {
        Error::Io(err)
    }
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numeric, 4 i/o.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 2,
            Error::Numeric(_) => 3,
            Error::Io(_) | Error::Checkpoint(_) => 4,
        }
    }
}
