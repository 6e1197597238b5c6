use std::fmt;

/// Error type shared by every module in the crate.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    /// Dataset construction or preprocessing contract violation.
    #[error("data error: {0}")]
    Data(String),
    /// Model fitting/prediction contract violation.
    #[error("model error: {0}")]
    Model(String),
    /// Run configuration rejected before any work started.
    #[error("config error: {0}")]
    Config(String),
    /// The LM response contained no recognizable feature name.
    #[error("unparseable response: {0}")]
    Unparseable(String),
    /// Transport failure that survived every retry.
    #[error("operator unavailable: {0}")]
    OperatorUnavailable(String),
    /// The endpoint answered with a body that is not a chat completion.
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("oracle error: {0}")]
    Oracle(String),
}

impl Error {
    pub(crate) fn data(msg: impl fmt::Display) -> Self {
        Error::Data(msg.to_string())
    }

    pub(crate) fn model(msg: impl fmt::Display) -> Self {
        Error::Model(msg.to_string())
    }

    pub(crate) fn config(msg: impl fmt::Display) -> Self {
        Error::Config(msg.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
