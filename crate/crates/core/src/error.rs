use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("bucket size mismatch: {left} vs {right}")]
    DomainMismatch { left: u64, right: u64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("exact tie between candidate indices {tied:?}")]
    Tie { tied: Vec<usize> },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("joint state space has {states} states, limit is {limit}")]
    StateSpaceTooLarge { states: u128, limit: u128 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::Parse { .. } => 2,
            Error::DomainMismatch { .. }
            | Error::Precondition(_)
            | Error::InvalidDistribution(_)
            | Error::Validation(_)
            | Error::StateSpaceTooLarge { .. } => 3,
            Error::Numerical(_) => 4,
            Error::Tie { .. } => 5,
        }
    }
}
