//! Training for the restoration network: Adam with coupled L2 decay, a
//! halving learning-rate schedule, aligned patch sampling over a generated
//! dataset, and a deterministic, resumable loop.

mod adam;
mod batch;
mod config;
mod error;
mod run;

pub use adam::{adam_step, AdamState, ADAM_EPS, BETA1, BETA2};
pub use batch::{load_split, sample_patch_batch, TrainSet};
pub use config::TrainConfig;
pub use error::TrainError;
pub use run::{train, TrainOutcome, MODEL_FILE, OPTIM_FILE};

pub type Result<T, E = TrainError> = std::result::Result<T, E>;
