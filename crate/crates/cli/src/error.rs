use hyperu_core::Error;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),

    #[error("empty pattern: {0}")]
    Empty(String),

    #[error("numerical failure: {0}")]
    Numerical(Error),

    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) | CliError::Io(_) => 2,
            CliError::Empty(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::EmptyPattern | Error::EmptyInput(_) => CliError::Empty(e.to_string()),
            // bad flag values surface as domain or input errors from the core
            Error::InvalidInput(_) | Error::Domain { .. } | Error::WindowTooSmall { .. } => CliError::Parse(e.to_string()),
            Error::Io(s) => CliError::Io(s),
            other => CliError::Numerical(other),
        }
    }
}
