use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range for {len} points")]
    InvalidIndex { index: usize, len: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A desk-scale cap was hit. Distinguishable from every other failure so
    /// callers can report it separately (CLI exit code 3).
    #[error("cap exceeded: {what} (limit {limit})")]
    CapExceeded { what: String, limit: u64 },

    #[error("oracle budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid encoding: {0}")]
    Encoding(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub fn cap(what: impl Into<String>, limit: u64) -> Self {
        Error::CapExceeded {
            what: what.into(),
            limit,
        }
    }

    pub fn is_cap(&self) -> bool {
        matches!(self, Error::CapExceeded { .. })
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
