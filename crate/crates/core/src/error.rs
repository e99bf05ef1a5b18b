use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("contract violation: {0}")]
    ContractViolation(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid prefix: {0}")]
    InvalidPrefix(String),
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("sequence has zero probability; its code interval is empty")]
    EmptyInterval,
    #[error("model has more than {bound} reachable sequences")]
    TooLarge { bound: usize },
    #[error("input error: {0}")]
    Input(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::InvalidModel(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
