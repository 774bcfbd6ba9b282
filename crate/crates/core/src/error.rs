use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("wave vector must be nonzero")]
    ZeroWaveVector,

    #[error("resource limit exceeded: {terms} time-basis terms > ceiling {ceiling} (order {order})")]
    ResourceLimit {
        order: usize,
        terms: usize,
        ceiling: usize,
    },

    #[error("missing constant {0}")]
    MissingConstant(String),

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
