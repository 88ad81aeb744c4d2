use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numeric degeneracy: vector norm {norm:e} below {threshold:e}")]
    NumericDegeneracy { norm: f64, threshold: f64 },
    #[error("training failed at step {step}: {reason}")]
    TrainingFailure { step: usize, reason: String },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
