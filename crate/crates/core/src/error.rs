//! Crate-wide error type.

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug)]
pub enum Error {
    /// Invalid configuration value or unknown configuration key.
    Config(String),
    /// Invalid runtime input such as a mismatched dimension or an
    /// out-of-range reference trajectory.
    Input(String),
    /// Malformed file contents (CSV trace, checkpoint, dataset).
    Format(String),
    /// Training failed, e.g. parameters diverged to non-finite values.
    Training(String),
    Io(std::io::Error),
}

impl std::fmt::Display for Error {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "config error: {msg}"),
            Error::Input(msg) => write!(f, "input error: {msg}"),
            Error::Format(msg) => write!(f, "format error: {msg}"),
            Error::Training(msg) => write!(f, "training error: {msg}"),
            Error::Io(err) => write!(f, "io error: {err}"),
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

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err)
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Format(err.to_string())
    }
}
