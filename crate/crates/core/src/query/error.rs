use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QueryError {
    #[error("{message} at offset {position}")]
    Lex { position: usize, ch: char, message: String },
    #[error("syntax error at offset {position}: expected {}, found {found}", expected.join(" or "))]
    Parse { position: usize, expected: Vec<String>, found: String },
    #[error("unknown table {name:?}")]
    UnknownTable { name: String, position: usize },
    #[error("unknown column {name:?}")]
    UnknownColumn { name: String, position: usize },
    #[error("unknown function {name:?}")]
    UnknownFunction { name: String, position: usize },
    #[error("column reference {name:?} is ambiguous")]
    AmbiguousColumn { name: String, position: usize },
    #[error("{function} expects {expected} arguments, got {actual}")]
    Arity { function: String, expected: String, actual: usize, position: usize },
    #[error("type error at offset {position}: {message}")]
    Type { position: usize, message: String },
    #[error("runtime error at offset {position}: {message}")]
    Runtime { position: usize, message: String },
    #[error("internal error: {0}")]
    Internal(String),
}

impl QueryError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            QueryError::Lex { .. } => "lex_error",
            QueryError::Parse { .. } => "parse_error",
            QueryError::UnknownTable { .. } => "unknown_table",
            QueryError::UnknownColumn { .. } => "unknown_column",
            QueryError::UnknownFunction { .. } => "unknown_function",
            QueryError::AmbiguousColumn { .. } => "ambiguous_column",
            QueryError::Arity { .. } => "arity_error",
            QueryError::Type { .. } => "type_error",
            QueryError::Runtime { .. } => "runtime_error",
            QueryError::Internal(_) => "internal_error",
        }
    }

    /// Byte offset into the query text, when the error has one.
    pub fn position(&self) -> Option<usize> {
        match *self {
            QueryError::Lex { position, .. }
            | QueryError::Parse { position, .. }
            | QueryError::UnknownTable { position, .. }
            | QueryError::UnknownColumn { position, .. }
            | QueryError::UnknownFunction { position, .. }
            | QueryError::AmbiguousColumn { position, .. }
            | QueryError::Arity { position, .. }
            | QueryError::Type { position, .. }
            | QueryError::Runtime { position, .. } => Some(position),
            QueryError::Internal(_) => None,
        }
    }

    /// True for faults of the server rather than of the query.
    pub fn is_internal(&self) -> bool {
        matches!(self, QueryError::Internal(_))
    }
}
