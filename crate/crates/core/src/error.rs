use thiserror::Error;

/// Errors produced while building, encoding, decoding or querying a sketch.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("points {first} and {second} are identical")]
    DuplicatePoint { first: usize, second: usize },

    #[error("unsupported norm for this operation: {0}")]
    UnsupportedNorm(String),

    #[error("normalized displacement at node {node} has norm {norm} > {limit}")]
    NormOverflow { node: usize, norm: f64, limit: f64 },

    #[error("encode error: {0}")]
    Encode(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("format error at bit {offset}: {msg}")]
    Format { offset: u64, msg: String },

    #[error("unknown point label {0}")]
    UnknownLabel(usize),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Coarse failure classes, used by the CLI to pick an exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Format,
    Data,
    Internal,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Encode(_) | Error::Decode(_) | Error::Format { .. } | Error::Io(_) => {
                ErrorClass::Format
            }
            Error::DimensionMismatch { .. }
            | Error::InvalidInput(_)
            | Error::DuplicatePoint { .. }
            | Error::UnsupportedNorm(_)
            | Error::UnknownLabel(_) => ErrorClass::Data,
            Error::NormOverflow { .. } | Error::Internal(_) => ErrorClass::Internal,
        }
    }

    pub(crate) fn format(offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            offset,
            msg: msg.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
