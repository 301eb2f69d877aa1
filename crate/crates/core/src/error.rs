use thiserror::Error;

/// Errors produced by the control laboratory.
#[derive(Debug, Error)]
pub enum ControlError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("divergence at time slice {slice} (t = {t}): {detail}")]
    Divergence { slice: usize, t: f64, detail: String },

    #[error("path blew up at step {step}")]
    BlowUp { step: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("corrupt field file: {0}")]
    Corrupt(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, ControlError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(ControlError::Domain(msg.into()))
}

pub(crate) fn config<T>(msg: impl Into<String>) -> Result<T> {
    Err(ControlError::Config(msg.into()))
}
