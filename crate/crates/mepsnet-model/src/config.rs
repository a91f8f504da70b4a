use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::Result;

/// Architecture hyperparameters. The serialized field names are the config
/// file contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MepsNetConfig {
    pub n_experts: usize,
    pub n_srir_per_expert: usize,
    pub n_sresidual_per_srir: usize,
    pub n_templates: usize,
    pub expert_width: usize,
    pub fusion_reduction: usize,
    pub kernel_size: usize,
}

impl MepsNetConfig {
    /// Full-scale configuration.
    pub fn paper_default() -> Self {
        MepsNetConfig {
            n_experts: 3,
            n_srir_per_expert: 3,
            n_sresidual_per_srir: 12,
            n_templates: 16,
            expert_width: 256,
            fusion_reduction: 16,
            kernel_size: 3,
        }
    }

    /// Minutes-scale configuration for training runs on one CPU core.
    pub fn desk_default() -> Self {
        MepsNetConfig {
            n_experts: 3,
            n_srir_per_expert: 1,
            n_sresidual_per_srir: 2,
            n_templates: 4,
            expert_width: 16,
            fusion_reduction: 4,
            kernel_size: 3,
        }
    }

    /// Smallest complete network, used for the finite-difference audit.
    pub fn desk_tiny() -> Self {
        MepsNetConfig {
            n_experts: 2,
            n_srir_per_expert: 1,
            n_sresidual_per_srir: 1,
            n_templates: 2,
            expert_width: 4,
            fusion_reduction: 4,
            kernel_size: 3,
        }
    }

    /// Same architecture with a different expert count, for parameter-growth
    /// comparisons.
    pub fn with_experts(&self, n_experts: usize) -> Self {
        MepsNetConfig { n_experts, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        let all_counts = [
            self.n_experts,
            self.n_srir_per_expert,
            self.n_sresidual_per_srir,
            self.n_templates,
            self.expert_width,
            self.fusion_reduction,
            self.kernel_size,
        ];
        if all_counts.iter().any(|&c| c == 0) {
            return Err(ModelError::InvalidConfig(
                "all counts must be at least 1".into(),
            ));
        }
        if self.kernel_size % 2 == 0 {
            return Err(ModelError::InvalidConfig(format!(
                "kernel_size must be odd, got {}",
                self.kernel_size
            )));
        }
        let fused = self.n_experts * self.expert_width;
        if fused % self.fusion_reduction != 0 {
            return Err(ModelError::InvalidConfig(format!(
                "n_experts*expert_width = {fused} not divisible by fusion_reduction {}",
                self.fusion_reduction
            )));
        }
        Ok(())
    }

    /// Extraction channel plan: 3 -> ceil(C/4) -> ceil(C/2) -> C.
    pub fn extract_widths(&self) -> [usize; 4] {
        let c = self.expert_width;
        [3, c.div_ceil(4), c.div_ceil(2), c]
    }

    pub fn fused_width(&self) -> usize {
        self.n_experts * self.expert_width
    }

    pub fn pad(&self) -> usize {
        (self.kernel_size - 1) / 2
    }

    /// Shared convolutions in the whole model (two per SResidual).
    pub fn n_sconv(&self) -> usize {
        self.n_experts * self.n_srir_per_expert * self.n_sresidual_per_srir * 2
    }
}
