use serde::{Deserialize, Serialize};

use crate::error::TrainError;
use crate::Result;

/// Training schedule. Serialized field names are the config file contract.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub iters: u64,
    pub batch: usize,
    pub patch: usize,
    pub base_lr: f64,
    /// Iterations at which the learning rate halves, strictly ascending.
    pub lr_drops: Vec<u64>,
    pub weight_decay: f64,
    pub seed: u64,
    /// Steps between periodic checkpoints; 0 disables periodic saves. The
    /// final checkpoint is written regardless.
    pub checkpoint_every: u64,
}

impl TrainConfig {
    /// Full-scale schedule.
    pub fn paper_default() -> Self {
        TrainConfig {
            iters: 1_200_000,
            batch: 16,
            patch: 80,
            base_lr: 1e-4,
            lr_drops: vec![120_000, 300_000],
            weight_decay: 1e-4,
            seed: 1,
            checkpoint_every: 10_000,
        }
    }

    /// Proportional miniature that finishes in minutes on one core. The
    /// hotter base_lr compensates for the tiny step budget.
    pub fn desk_default() -> Self {
        TrainConfig {
            iters: 500,
            batch: 8,
            patch: 32,
            base_lr: 1e-3,
            lr_drops: vec![200, 350],
            weight_decay: 1e-4,
            seed: 1,
            checkpoint_every: 100,
        }
    }

    pub fn validate(&self, kernel_size: usize) -> Result<()> {
        if self.batch == 0 {
            return Err(TrainError::InvalidInput("batch must be at least 1".into()));
        }
        if self.patch < kernel_size {
            return Err(TrainError::InvalidInput(format!(
                "patch {} smaller than the {}x{} kernel",
                self.patch, kernel_size, kernel_size
            )));
        }
        if self.lr_drops.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TrainError::InvalidInput(format!(
                "lr_drops must be strictly ascending, got {:?}",
                self.lr_drops
            )));
        }
        if !(self.base_lr.is_finite() && self.weight_decay.is_finite()) {
            return Err(TrainError::InvalidInput(
                "base_lr and weight_decay must be finite".into(),
            ));
        }
        Ok(())
    }

    /// base_lr halved once per drop that has been reached.
    pub fn lr_at(&self, iter: u64) -> f64 {
        let halvings = self.lr_drops.iter().filter(|&&d| d <= iter).count();
        self.base_lr * 0.5f64.powi(halvings as i32)
    }
}
