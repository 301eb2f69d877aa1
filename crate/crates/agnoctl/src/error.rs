use agnostic_core::ControlError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AppError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] ControlError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl AppError {
    /// Process exit code: 2 configuration, 3 numerical divergence, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            AppError::Config(_) => 2,
            AppError::Io(_) => 4,
            AppError::Core(e) => match e {
                ControlError::Domain(_) | ControlError::Config(_) => 2,
                ControlError::Divergence { .. } | ControlError::BlowUp { .. } => 3,
                ControlError::Io(_) | ControlError::Corrupt(_) => 4,
                ControlError::Internal(_) => 1,
            },
        }
    }
}
