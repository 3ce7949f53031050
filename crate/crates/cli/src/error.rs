use std::fmt;

/// CLI-side failures: configuration problems exit with code 2, runtime
/// problems likewise; sampled violations are report content, not errors.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(std::io::Error),
    Core(metriclab_core::Error),
    Runtime(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Runtime(msg) => write!(f, "runtime error: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<metriclab_core::Error> for CliError {
    fn from(e: metriclab_core::Error) -> Self {
        CliError::Core(e)
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
