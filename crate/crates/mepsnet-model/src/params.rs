//! Named, ordered parameter storage and the parameter census.

use std::collections::HashMap;

use serde::Serialize;
use tensor_core::{Element, Rng, Tensor};

use crate::config::MepsNetConfig;
use crate::error::ModelError;
use crate::Result;

/// Parameters in a frozen traversal order. The order is the checkpoint
/// order, the flat-vector order of the gradient audit, and the child-stream
/// index of initialization, so it must never change across versions.
#[derive(Debug, Clone)]
pub struct ParamSet<T: Element> {
    entries: Vec<(String, Tensor<T>)>,
    index: HashMap<String, usize>,
}

impl<T: Element> ParamSet<T> {
    /// Builds a set from `(name, tensor)` pairs. Names must be unique; the
    /// given order becomes the frozen traversal order.
    pub fn from_entries(entries: Vec<(String, Tensor<T>)>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, (n, _))| (n.clone(), i))
            .collect();
        ParamSet { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor<T>)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    pub fn get(&self, name: &str) -> &Tensor<T> {
        let i = self.index[name];
        &self.entries[i].1
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor<T> {
        let i = self.index[name];
        &mut self.entries[i].1
    }

    pub fn try_get_mut(&mut self, name: &str) -> Option<&mut Tensor<T>> {
        let i = *self.index.get(name)?;
        Some(&mut self.entries[i].1)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn tensor(&self, i: usize) -> &Tensor<T> {
        &self.entries[i].1
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor<T> {
        &mut self.entries[i].1
    }

    pub fn numel_total(&self) -> usize {
        self.entries.iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|(_, t)| t.data().iter().map(|v| v.into_f64()))
            .collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.numel_total() {
            return Err(ModelError::InvalidConfig(format!(
                "flat vector holds {} values, model has {}",
                values.len(),
                self.numel_total()
            )));
        }
        let mut off = 0;
        for (_, t) in &mut self.entries {
            for v in t.data_mut() {
                *v = T::from_f64(values[off]);
                off += 1;
            }
        }
        Ok(())
    }
}

/// Builds the zeroed parameter list for a validated config.
pub(crate) fn build_params<T: Element>(cfg: &MepsNetConfig) -> ParamSet<T> {
    let s = cfg.kernel_size;
    let c = cfg.expert_width;
    let k = cfg.n_templates;
    let [w_in, w_q, w_h, w_c] = cfg.extract_widths();
    let fused = cfg.fused_width();
    let squeezed = fused / cfg.fusion_reduction;

    let mut e: Vec<(String, Tensor<T>)> = Vec::new();
    let conv = |e: &mut Vec<(String, Tensor<T>)>, name: &str, co: usize, ci: usize, ks: usize| {
        e.push((format!("{name}.weight"), Tensor::zeros(vec![co, ci, ks, ks])));
        e.push((format!("{name}.bias"), Tensor::zeros(vec![co])));
    };

    conv(&mut e, "extract.0", w_q, w_in, s);
    conv(&mut e, "extract.1", w_h, w_q, s);
    conv(&mut e, "extract.2", w_c, w_h, s);
    for j in 0..k {
        e.push((format!("bank.template.{j}"), Tensor::zeros(vec![c, c, s, s])));
    }
    for x in 0..cfg.n_experts {
        conv(&mut e, &format!("expert.{x}.entry"), c, c, 1);
        for sr in 0..cfg.n_srir_per_expert {
            for b in 0..cfg.n_sresidual_per_srir {
                for half in ["conv1", "conv2"] {
                    let base = format!("expert.{x}.srir.{sr}.res.{b}.{half}");
                    e.push((format!("{base}.coeffs"), Tensor::zeros(vec![k])));
                    e.push((format!("{base}.bias"), Tensor::zeros(vec![c])));
                }
            }
        }
        conv(&mut e, &format!("expert.{x}.exit"), c, c, 1);
    }
    conv(&mut e, "fusion.reduce", squeezed, fused, 1);
    conv(&mut e, "fusion.expand", fused, squeezed, 1);
    conv(&mut e, "recon.0", c, fused, s);
    conv(&mut e, "recon.1", 3, c, s);

    ParamSet::from_entries(e)
}

/// He-normal initialization for weights and templates, N(0, 1/K) for mixing
/// coefficients, zero biases. Every parameter draws from its own child
/// stream keyed by position, so adding draws to one tensor can never shift
/// another's values.
pub(crate) fn init_params<T: Element>(params: &mut ParamSet<T>, cfg: &MepsNetConfig, seed: u64) {
    let k = cfg.n_templates;
    for i in 0..params.len() {
        let name = params.name(i).to_string();
        let mut rng = Rng::child(seed, i as u64);
        let t = params.tensor_mut(i);
        let std = if name.ends_with(".bias") {
            continue;
        } else if name.ends_with(".coeffs") {
            (1.0 / k as f64).sqrt()
        } else {
            // Templates share the conv shape [Cout, Cin, S, S].
            let shape = t.shape();
            let fan_in = shape[1] * shape[2] * shape[3];
            (2.0 / fan_in as f64).sqrt()
        };
        *t = Tensor::randn(t.shape().to_vec(), std, &mut rng);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Census {
    pub shared_templates: usize,
    pub coefficients: usize,
    pub unshared: usize,
    pub total: usize,
}

pub(crate) fn census<T: Element>(params: &ParamSet<T>) -> Census {
    let mut c = Census {
        shared_templates: 0,
        coefficients: 0,
        unshared: 0,
        total: 0,
    };
    for (name, t) in params.iter() {
        let n = t.numel();
        c.total += n;
        if name.starts_with("bank.template.") {
            c.shared_templates += n;
        } else if name.ends_with(".coeffs") {
            c.coefficients += n;
        } else {
            c.unshared += n;
        }
    }
    c
}
