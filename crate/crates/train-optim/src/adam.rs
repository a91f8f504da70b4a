//! Adam with coupled L2 weight decay.

use std::path::Path;

use mepsnet_model::{read_container, write_container, ParamSet};
use tensor_core::{Element, Tensor};

use crate::error::TrainError;
use crate::Result;

pub const BETA1: f64 = 0.9;
/// Quoted schedule value; intentionally not the common 0.999.
pub const BETA2: f64 = 0.99;
pub const ADAM_EPS: f64 = 1e-8;

/// First/second moment buffers mirroring the parameter list, plus the step
/// counter. `t` only ever moves forward, one tick per applied step.
pub struct AdamState<T: Element> {
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
    t: u64,
}

impl<T: Element> AdamState<T> {
    pub fn new(params: &ParamSet<T>) -> Self {
        let zeros: Vec<Tensor<T>> = (0..params.len())
            .map(|i| Tensor::zeros(params.tensor(i).shape().to_vec()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&self) -> u64 {
        self.t
    }

    /// Serializes into the shared checkpoint container: step in the metadata,
    /// buffers as `m.<param>` / `v.<param>` tensors.
    pub fn save(&self, path: &Path, params: &ParamSet<T>) -> Result<()> {
        let meta = serde_json::json!({ "step": self.t }).to_string();
        let mut named: Vec<(String, &Tensor<T>)> = Vec::with_capacity(2 * params.len());
        for i in 0..params.len() {
            named.push((format!("m.{}", params.name(i)), &self.m[i]));
        }
        for i in 0..params.len() {
            named.push((format!("v.{}", params.name(i)), &self.v[i]));
        }
        let count = named.len();
        write_container(path, &meta, named.iter().map(|(n, t)| (n.as_str(), *t)), count)?;
        Ok(())
    }

    pub fn load(path: &Path, params: &ParamSet<T>) -> Result<Self> {
        let (meta, tensors) = read_container(path)?;
        let parsed: serde_json::Value = serde_json::from_str(&meta)
            .map_err(|e| TrainError::InvalidInput(format!("optimizer metadata: {e}")))?;
        let t = parsed["step"]
            .as_u64()
            .ok_or_else(|| TrainError::InvalidInput("optimizer metadata lacks step".into()))?;

        if tensors.len() != 2 * params.len() {
            return Err(TrainError::InvalidInput(format!(
                "optimizer state holds {} tensors, expected {}",
                tensors.len(),
                2 * params.len()
            )));
        }
        let mut state = AdamState::new(params);
        state.t = t;
        for (name, stored) in tensors {
            let (buf, param_name) = match name.split_once('.') {
                Some(("m", rest)) => (&mut state.m, rest),
                Some(("v", rest)) => (&mut state.v, rest),
                _ => {
                    return Err(TrainError::InvalidInput(format!(
                        "unknown optimizer tensor {name}"
                    )))
                }
            };
            let i = params.position(param_name).ok_or_else(|| {
                TrainError::InvalidInput(format!("optimizer tensor {name} matches no parameter"))
            })?;
            if stored.shape() != buf[i].shape() {
                return Err(TrainError::InvalidInput(format!(
                    "optimizer tensor {name}: shape {:?} does not match {:?}",
                    stored.shape(),
                    buf[i].shape()
                )));
            }
            buf[i] = stored.cast::<T>();
        }
        Ok(state)
    }
}

/// One Adam update. Weight decay couples into the gradient (g + wd*p) for
/// every parameter except biases. All gradients are validated finite before
/// anything mutates, so a rejected step leaves parameters and state intact.
pub fn adam_step<T: Element>(
    params: &mut ParamSet<T>,
    grads: &[Vec<T>],
    state: &mut AdamState<T>,
    lr: f64,
    weight_decay: f64,
) -> Result<()> {
    if grads.len() != params.len() {
        return Err(TrainError::InvalidInput(format!(
            "{} gradient tensors for {} parameters",
            grads.len(),
            params.len()
        )));
    }
    for i in 0..params.len() {
        if grads[i].len() != params.tensor(i).numel() {
            return Err(TrainError::InvalidInput(format!(
                "gradient for {} holds {} values, parameter has {}",
                params.name(i),
                grads[i].len(),
                params.tensor(i).numel()
            )));
        }
        if grads[i].iter().any(|g| !g.into_f64().is_finite()) {
            return Err(TrainError::NonFinite(format!(
                "gradient for {}",
                params.name(i)
            )));
        }
    }

    state.t += 1;
    let bc1 = 1.0 - BETA1.powi(state.t as i32);
    let bc2 = 1.0 - BETA2.powi(state.t as i32);
    for i in 0..params.len() {
        let decay = if params.name(i).ends_with(".bias") {
            0.0
        } else {
            weight_decay
        };
        let m = state.m[i].data_mut();
        let v = state.v[i].data_mut();
        let p = params.tensor_mut(i).data_mut();
        for j in 0..p.len() {
            let g = grads[i][j].into_f64() + decay * p[j].into_f64();
            let mj = BETA1 * m[j].into_f64() + (1.0 - BETA1) * g;
            let vj = BETA2 * v[j].into_f64() + (1.0 - BETA2) * g * g;
            m[j] = T::from_f64(mj);
            v[j] = T::from_f64(vj);
            let update = lr * (mj / bc1) / ((vj / bc2).sqrt() + ADAM_EPS);
            p[j] = T::from_f64(p[j].into_f64() - update);
        }
    }
    Ok(())
}
