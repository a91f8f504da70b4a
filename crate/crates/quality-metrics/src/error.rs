use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("{0}")]
    InvalidInput(String),
    #[error("restoration failed on {name}: {detail}")]
    Restore { name: String, detail: String },
    #[error(transparent)]
    Synth(#[from] shdd_synth::SynthError),
    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub(crate) fn io(path: &Path, source: std::io::Error) -> MetricsError {
    MetricsError::Io {
        path: path.to_path_buf(),
        cause: source,
    }
}
