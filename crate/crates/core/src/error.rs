//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A numeric parameter is outside its documented range.
    #[error("parameter `{name}` out of range: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("unsupported wavelet kind: {0}")]
    UnsupportedWavelet(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("profile error: {0}")]
    Profile(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// A mode set built for one generator variant was evaluated with the other.
    #[error("variant mismatch: mode set was built for {built}, requested {requested}")]
    VariantMismatch { built: String, requested: String },

    #[error("grid error: {0}")]
    Grid(String),

    #[error("field format error: {0}")]
    FieldFormat(String),

    #[error("diagnostics error: {0}")]
    Diagnostics(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
