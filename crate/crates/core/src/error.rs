use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid layer: {0}")]
    InvalidLayer(String),

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("invalid property: {0}")]
    InvalidProperty(String),

    /// A simplification step cannot be applied to the given network.
    #[error("invalid step: {0}")]
    InvalidStep(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("malformed model graph: {0}")]
    ModelStructure(String),

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(line: usize, column: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }
}
