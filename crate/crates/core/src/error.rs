use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid effect: {0}")]
    InvalidEffect(String),

    #[error("invalid measurement setting `{name}`: {reason}")]
    InvalidSetting { name: String, reason: String },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: String, reason: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error("enumeration needs {count} datasets, cap is {cap}")]
    CapExceeded { count: u128, cap: u128 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn arg(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field: field.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
