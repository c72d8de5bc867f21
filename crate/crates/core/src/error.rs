use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {reason}")]
    Parse { offset: usize, reason: String },

    #[error("jpeg decode error at byte {pos}: {reason}")]
    Decode { pos: usize, reason: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(offset: usize, reason: impl Into<String>) -> Self {
        Error::Parse {
            offset,
            reason: reason.into(),
        }
    }

    pub(crate) fn decode(pos: usize, reason: impl Into<String>) -> Self {
        Error::Decode {
            pos,
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
