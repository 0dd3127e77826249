use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("non-finite gradient at index {index}")]
    NonFiniteGradient { index: usize },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("usage: {0}")]
    Usage(String),

    #[error("contract violated: {0}")]
    Contract(String),

    #[error("orphan infected nodes with no eligible parent: {0:?}")]
    Orphan(Vec<usize>),

    #[error("sampling: {0}")]
    Sampling(String),

    #[error("undefined: {0}")]
    Undefined(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}
