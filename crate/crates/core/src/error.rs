use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Caller supplied data that does not describe a valid problem or request.
    #[error("invalid input: {0}")]
    Input(String),

    #[error("order {order} cannot be scheduled at position {position}: start {start} exceeds latest start {latest}")]
    Infeasible {
        order: usize,
        position: usize,
        start: f64,
        latest: f64,
    },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("instance has {n} orders, exceeding the limit of {limit}")]
    Size { n: usize, limit: usize },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
