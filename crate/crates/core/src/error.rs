use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The scenario file is not well-formed TOML.
    #[error("parse error: {0}")]
    Parse(String),

    /// A field is missing, has the wrong type, or breaks a single-field invariant.
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },

    /// Fields are individually valid but inconsistent with each other.
    #[error("physical inconsistency at `{path}`: {message}")]
    Physical { path: String, message: String },

    #[error("malformed trace: {0}")]
    Trace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn physical(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Physical {
            path: path.into(),
            message: message.into(),
        }
    }
}
