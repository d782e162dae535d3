use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("invalid welfare specification: {0}")]
    InvalidWelfare(String),

    #[error("{what} index {index} out of range (expected < {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("capacity exceeded: {what} requires {requested} entries, limit is {limit}")]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("invalid solver state: {0}")]
    State(String),

    #[error("unbounded linear program: {0}")]
    Unbounded(String),

    #[error("malformed document: {0}")]
    Document(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_index(what: &'static str, index: usize, len: usize) -> Result<()> {
    if index < len {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, index, len })
    }
}
