//! Whole-model gradient audit against finite differences, in f64.

use std::time::Instant;

use serde::Serialize;
use tensor_core::{finite_diff_grad, max_relative_error, Graph, Rng, Tensor};

use crate::config::MepsNetConfig;
use crate::model::MepsNet;
use crate::Result;

pub const AUDIT_EPS: f64 = 1e-5;
/// Coordinates whose analytic and numeric gradients are both below this
/// magnitude are compared against the floor instead of each other, keeping
/// rounding noise on near-zero gradients out of the ratio.
pub const AUDIT_FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct GradAuditReport {
    pub n_params: usize,
    pub max_rel_err: f64,
    pub eps: f64,
    pub seconds: f64,
}

/// Checks every parameter of a freshly initialized f64 model on one random
/// `side`x`side` input against central finite differences.
pub fn grad_audit(config: &MepsNetConfig, side: usize, seed: u64) -> Result<GradAuditReport> {
    let start = Instant::now();
    let mut model = MepsNet::<f64>::new(*config)?;
    model.init(Rng::child_seed(seed, 1));

    let mut rng = Rng::child(seed, 2);
    let input = Tensor::randn(vec![1, 3, side, side], 1.0, &mut rng);
    let target = Tensor::randn(vec![1, 3, side, side], 1.0, &mut rng);

    let eval = |m: &MepsNet<f64>| -> Result<(f64, Vec<f64>)> {
        let mut g = Graph::new();
        let pass = m.forward(&mut g, input.clone())?;
        let t = g.leaf(target.clone());
        let loss = g.mse_loss(pass.output, t)?;
        g.backward(loss)?;
        let grads: Vec<f64> = pass
            .param_ids
            .iter()
            .flat_map(|id| g.grad(*id).unwrap().to_vec())
            .collect();
        Ok((g.value(loss).item()?, grads))
    };

    let (_, analytic) = eval(&model)?;

    let flat = model.params().flat();
    let mut probe_err: Option<crate::error::ModelError> = None;
    let numeric = finite_diff_grad(
        |p| {
            model.params_mut().set_flat(p).unwrap();
            match eval(&model) {
                Ok((loss, _)) => loss,
                Err(e) => {
                    probe_err = Some(e);
                    f64::NAN
                }
            }
        },
        &flat,
        AUDIT_EPS,
    );
    model.params_mut().set_flat(&flat).unwrap();
    if let Some(e) = probe_err {
        return Err(e);
    }

    Ok(GradAuditReport {
        n_params: flat.len(),
        max_rel_err: max_relative_error(&analytic, &numeric, AUDIT_FLOOR),
        eps: AUDIT_EPS,
        seconds: start.elapsed().as_secs_f64(),
    })
}
