use crate::dsl::ParseError;
use crate::semantics::ActionRecord;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("array index {index} out of bounds for `{array}` of length {len}")]
    IndexOutOfBounds { array: String, index: i64, len: usize },
    #[error("integer overflow")]
    Overflow,
    #[error("remainder by zero")]
    RemainderByZero,
    #[error("method `{method}` exceeded its fuel of {fuel} steps")]
    FuelExhausted { method: String, fuel: u64 },
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{method}` expects {expected} argument(s), got {got}")]
    Arity { method: String, expected: usize, got: usize },
    #[error("arguments {args:?} violate the precondition of `{method}`")]
    Precondition { method: String, args: Vec<i64> },
    #[error("in `{method}`: {source}")]
    InMethod { method: String, source: Box<Error> },
    #[error("after trace {}: {source}", crate::semantics::format_trace(.trace))]
    AtTrace { trace: Vec<ActionRecord>, source: Box<Error> },
    #[error("invalid bounds: {0}")]
    Bounds(String),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, e: std::io::Error) -> Error {
        Error::Io { path: path.as_ref().display().to_string(), message: e.to_string() }
    }

    pub(crate) fn in_method(self, method: &str) -> Error {
        match self {
            e @ Error::InMethod { .. } => e,
            e => Error::InMethod { method: method.to_string(), source: Box::new(e) },
        }
    }

    pub(crate) fn at_trace(self, trace: Vec<ActionRecord>) -> Error {
        Error::AtTrace { trace, source: Box::new(self) }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
