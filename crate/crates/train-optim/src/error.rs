use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Model(#[from] mepsnet_model::ModelError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error(transparent)]
    Synth(#[from] shdd_synth::SynthError),
    #[error("{0}")]
    InvalidInput(String),
    #[error("non-finite {0}")]
    NonFinite(String),
    #[error("{path}: {cause}")]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
}

pub(crate) fn io(path: &Path, source: std::io::Error) -> TrainError {
    TrainError::Io {
        path: path.to_path_buf(),
        cause: source,
    }
}
