use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("{op}: {detail}")]
    InvalidInput { op: &'static str, detail: String },
    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error("{path}: {cause}")]
    Image {
        path: PathBuf,
        cause: image::ImageError,
    },
    #[error("manifest: {0}")]
    Json(#[from] serde_json::Error),
}

impl SynthError {
    pub(crate) fn invalid(op: &'static str, detail: impl Into<String>) -> Self {
        SynthError::InvalidInput {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SynthError::Io {
            path: path.into(),
            cause: source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        SynthError::Image {
            path: path.into(),
            cause: source,
        }
    }
}
