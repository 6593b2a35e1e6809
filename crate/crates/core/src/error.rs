use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: field `{0}`")]
    InvalidConfig(&'static str),

    #[error("empty input set")]
    EmptyInput,

    #[error("counter overflow: a counter would exceed {max}")]
    CounterOverflow { max: u32 },

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),

    #[error("corrupt sketch: {0}")]
    CorruptSketch(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },

    #[error("node id overflow at line {line}: {value} does not fit in 32 bits")]
    OverflowError { line: usize, value: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::DomainError(msg.into())
    }

    pub(crate) fn corrupt(msg: impl Into<String>) -> Self {
        Error::CorruptSketch(msg.into())
    }
}
