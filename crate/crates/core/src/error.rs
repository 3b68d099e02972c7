use thiserror::Error;

use crate::fitting::FitError;
use crate::ode::OdeError;
use crate::quad::QuadError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("target out of range: {0}")]
    Range(String),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error(transparent)]
    Ode(#[from] OdeError),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("config error at line {line}: {msg}")]
    Config { line: usize, msg: String },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed data: {0}")]
    Data(String),
}

/// Coarse classification used by the command-line front end for exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Io,
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Invalid(_) | Error::Range(_) | Error::Config { .. } | Error::Data(_) => {
                ErrorKind::Validation
            }
            Error::Io { .. } => ErrorKind::Io,
            _ => ErrorKind::Numerical,
        }
    }
}
