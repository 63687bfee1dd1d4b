use thiserror::Error;

/// Errors of the companion crate, split by the CLI exit code they map to.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Runtime(_) => 2,
        }
    }
}

impl From<nmar_core::Error> for Error {
    fn from(e: nmar_core::Error) -> Self {
        use nmar_core::Error as E;
        match e {
            E::InvalidConfig(_) | E::InvalidModel(_) => Error::Config(e.to_string()),
            _ => Error::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Runtime(e.to_string())
    }
}
