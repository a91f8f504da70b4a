use thiserror::Error;

/// Errors produced by tensor construction and graph operations.
#[derive(Debug, Error)]
pub enum TensorError {
    /// Shape of an operand does not match what the operation requires.
    /// The message names the operation and the offending dimension.
    #[error("{op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    /// `backward` was called on a tensor that is not a scalar.
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),

    /// An operation received an invalid argument (bad padding, even kernel,
    /// empty input list, ...).
    #[error("{op}: {detail}")]
    InvalidArgument { op: &'static str, detail: String },
}

impl TensorError {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn arg(op: &'static str, detail: impl Into<String>) -> Self {
        TensorError::InvalidArgument {
            op,
            detail: detail.into(),
        }
    }
}
