use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the command-line front end to pick an
/// exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("matrix has spectral radius zero; it cannot be rescaled")]
    ZeroSpectralRadius,

    #[error("normal equations are singular (ridge = {ridge}); use a positive ridge penalty")]
    Singular { ridge: f64 },

    #[error("non-finite value during {context}: {detail}")]
    NonFinite { context: &'static str, detail: String },

    #[error("neuron gain must stay positive, got {0}")]
    NonPositiveGain(f64),

    #[error("signal too short: {len} samples cannot be decomposed into {levels} levels")]
    SignalTooShort { len: usize, levels: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidConfig(_) => ErrorKind::Config,
            Error::DimensionMismatch { .. }
            | Error::Empty(_)
            | Error::SignalTooShort { .. }
            | Error::Io { .. }
            | Error::Format { .. } => ErrorKind::Data,
            Error::ZeroSpectralRadius
            | Error::Singular { .. }
            | Error::NonFinite { .. }
            | Error::NonPositiveGain(_) => ErrorKind::Numerical,
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::InvalidConfig(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
