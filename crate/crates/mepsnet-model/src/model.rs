//! Network assembly: extraction, template-shared experts, attentive
//! fusion, reconstruction.

use tensor_core::{Element, Graph, Tensor, TensorId};

use crate::config::MepsNetConfig;
use crate::error::ModelError;
use crate::params::{build_params, census, init_params, Census, ParamSet};
use crate::Result;

#[derive(Debug, Clone)]
pub struct MepsNet<T: Element> {
    config: MepsNetConfig,
    params: ParamSet<T>,
}

/// Graph handles produced by one forward build.
pub struct ForwardPass {
    pub output: TensorId,
    /// Extraction output F0.
    pub f0: TensorId,
    /// One per expert, before concatenation.
    pub expert_outputs: Vec<TensorId>,
    /// Leaf ids aligned with the parameter order; where gradients land.
    pub param_ids: Vec<TensorId>,
}

impl<T: Element> MepsNet<T> {
    pub fn new(config: MepsNetConfig) -> Result<Self> {
        config.validate()?;
        Ok(MepsNet {
            config,
            params: build_params(&config),
        })
    }

    pub fn config(&self) -> &MepsNetConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn init(&mut self, seed: u64) {
        init_params(&mut self.params, &self.config, seed);
    }

    pub fn census(&self) -> Census {
        census(&self.params)
    }

    /// Total if every shared convolution stored a private [C,C,S,S] weight
    /// instead of bank coefficients.
    pub fn no_sharing_total(&self) -> usize {
        let c = self.config.expert_width;
        let s = self.config.kernel_size;
        let full = c * c * s * s;
        let census = self.census();
        census.total - census.shared_templates - census.coefficients
            + self.config.n_sconv() * full
    }

    /// Casts every parameter through f64, preserving the order.
    pub fn cast<U: Element>(&self) -> MepsNet<U> {
        let entries = self
            .params
            .iter()
            .map(|(n, t)| (n.to_string(), t.cast::<U>()))
            .collect();
        MepsNet {
            config: self.config,
            params: ParamSet::from_entries(entries),
        }
    }

    /// Builds the whole network on `g` with `x` as a fresh leaf. Parameters
    /// enter the graph as leaves in census order (see `ForwardPass.param_ids`).
    pub fn forward(&self, g: &mut Graph<T>, x: Tensor<T>) -> Result<ForwardPass> {
        let cfg = &self.config;
        let shape = x.shape().to_vec();
        if shape.len() != 4 || shape[1] != 3 {
            return Err(ModelError::InvalidConfig(format!(
                "input must be [B,3,H,W], got {shape:?}"
            )));
        }
        if shape[2] < cfg.kernel_size || shape[3] < cfg.kernel_size {
            return Err(ModelError::InvalidConfig(format!(
                "spatial dims {}x{} smaller than the {}x{} kernel",
                shape[2], shape[3], cfg.kernel_size, cfg.kernel_size
            )));
        }

        let param_ids: Vec<TensorId> = self
            .params
            .iter()
            .map(|(_, t)| g.leaf(t.clone()))
            .collect();
        let id = |name: &str| -> TensorId {
            param_ids[self
                .params
                .position(name)
                .expect("parameter name is part of the frozen layout")]
        };

        let pad = cfg.pad();
        let x = g.leaf(x);

        // Extraction: three convs with relu between them.
        let h = g.conv2d(x, id("extract.0.weight"), id("extract.0.bias"), pad)?;
        let h = g.relu(h);
        let h = g.conv2d(h, id("extract.1.weight"), id("extract.1.bias"), pad)?;
        let h = g.relu(h);
        let f0 = g.conv2d(h, id("extract.2.weight"), id("extract.2.bias"), pad)?;

        let templates: Vec<TensorId> = (0..cfg.n_templates)
            .map(|j| id(&format!("bank.template.{j}")))
            .collect();

        let mut expert_outputs = Vec::with_capacity(cfg.n_experts);
        for xp in 0..cfg.n_experts {
            let entry_w = id(&format!("expert.{xp}.entry.weight"));
            let entry_b = id(&format!("expert.{xp}.entry.bias"));
            let mut v = g.conv2d(f0, entry_w, entry_b, 0)?;
            for sr in 0..cfg.n_srir_per_expert {
                let srir_in = v;
                let mut t = v;
                for b in 0..cfg.n_sresidual_per_srir {
                    let base = format!("expert.{xp}.srir.{sr}.res.{b}");
                    let w1 = g.template_mix(id(&format!("{base}.conv1.coeffs")), &templates)?;
                    let a = g.conv2d(t, w1, id(&format!("{base}.conv1.bias")), pad)?;
                    let a = g.relu(a);
                    let w2 = g.template_mix(id(&format!("{base}.conv2.coeffs")), &templates)?;
                    let b2 = g.conv2d(a, w2, id(&format!("{base}.conv2.bias")), pad)?;
                    t = g.add(t, b2)?;
                }
                v = g.add(srir_in, t)?;
            }
            let exit_w = id(&format!("expert.{xp}.exit.weight"));
            let exit_b = id(&format!("expert.{xp}.exit.bias"));
            let e = g.conv2d(v, exit_w, exit_b, 0)?;
            expert_outputs.push(g.add(f0, e)?);
        }

        let fd = g.concat_channels(&expert_outputs)?;

        // Attentive fusion: pooled descriptor -> bottleneck -> sigmoid gate.
        let batch = shape[0];
        let fused = cfg.fused_width();
        let pooled = g.global_avg_pool(fd)?;
        let pooled4 = g.reshape(pooled, vec![batch, fused, 1, 1])?;
        let z = g.conv2d(pooled4, id("fusion.reduce.weight"), id("fusion.reduce.bias"), 0)?;
        let z = g.relu(z);
        let z = g.conv2d(z, id("fusion.expand.weight"), id("fusion.expand.bias"), 0)?;
        let gate = g.sigmoid(z);
        let gate2 = g.reshape(gate, vec![batch, fused])?;
        let ff = g.scale_channels(fd, gate2)?;

        let r = g.conv2d(ff, id("recon.0.weight"), id("recon.0.bias"), pad)?;
        let r = g.relu(r);
        let output = g.conv2d(r, id("recon.1.weight"), id("recon.1.bias"), pad)?;

        Ok(ForwardPass {
            output,
            f0,
            expert_outputs,
            param_ids,
        })
    }
}
