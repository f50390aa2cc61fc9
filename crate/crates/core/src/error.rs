use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point ({n}, ({x1}, {x2})) is not reachable from the start point")]
    Unreachable { n: usize, x1: i64, x2: i64 },
    #[error("beta_hat must lie in the open interval (0, 1), got {0}")]
    BetaHatOutOfRange(f64),
    #[error("replica count {got} is below the floor of {floor} required by statistical gates")]
    TooFewReplicas { got: usize, floor: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
