//! The training loop: sample, forward, L2 loss, backward, Adam.

use std::io::Write;
use std::path::{Path, PathBuf};

use mepsnet_model::{save_model, MepsNet};
use tensor_core::{Element, Graph, Rng};

use crate::adam::{adam_step, AdamState};
use crate::batch::{sample_patch_batch, TrainSet};
use crate::config::TrainConfig;
use crate::error::TrainError;
use crate::Result;

pub const MODEL_FILE: &str = "model.ckpt";
pub const OPTIM_FILE: &str = "optim.ckpt";

#[derive(Debug)]
pub struct TrainOutcome {
    /// Loss per completed iteration of this call, in order.
    pub losses: Vec<f64>,
    pub model_path: PathBuf,
    pub optim_path: PathBuf,
}

/// Runs iterations `state.step()..cfg.iters`, so a freshly created state
/// trains from scratch and a loaded one resumes. Batches derive from
/// `Rng::child(cfg.seed, iter)`, making the trajectory a function of the
/// iteration index alone. Checkpoints overwrite `model.ckpt`/`optim.ckpt`
/// every `checkpoint_every` steps and at the end; a non-finite loss or
/// gradient aborts before the parameters move, leaving the last good pair
/// on disk.
pub fn train<T: Element>(
    model: &mut MepsNet<T>,
    state: &mut AdamState<T>,
    set: &TrainSet,
    cfg: &TrainConfig,
    out_dir: &Path,
    log: &mut dyn Write,
) -> Result<TrainOutcome> {
    cfg.validate(model.config().kernel_size)?;
    std::fs::create_dir_all(out_dir).map_err(|e| crate::error::io(out_dir, e))?;
    let model_path = out_dir.join(MODEL_FILE);
    let optim_path = out_dir.join(OPTIM_FILE);

    let mut losses = Vec::new();
    for iter in state.step()..cfg.iters {
        let mut rng = Rng::child(cfg.seed, iter);
        let (x, y) = sample_patch_batch::<T>(set, cfg.patch, cfg.batch, &mut rng)?;

        let mut g = Graph::new();
        let pass = model.forward(&mut g, x)?;
        let target = g.leaf(y);
        let loss_id = g.mse_loss(pass.output, target)?;
        let loss = g.value(loss_id).item()?.into_f64();
        if !loss.is_finite() {
            return Err(TrainError::NonFinite(format!("loss at iteration {iter}")));
        }
        g.backward(loss_id)?;
        let grads: Vec<Vec<T>> = pass
            .param_ids
            .iter()
            .map(|&id| g.grad(id).expect("backward fills every leaf").to_vec())
            .collect();

        let lr = cfg.lr_at(iter);
        adam_step(model.params_mut(), &grads, state, lr, cfg.weight_decay)?;

        writeln!(log, "iter={iter} loss={loss} lr={lr}")
            .map_err(|e| crate::error::io(out_dir, e))?;
        losses.push(loss);

        if cfg.checkpoint_every > 0 && state.step() % cfg.checkpoint_every == 0 {
            save_model(&model_path, model)?;
            state.save(&optim_path, model.params())?;
        }
    }

    save_model(&model_path, model)?;
    state.save(&optim_path, model.params())?;
    Ok(TrainOutcome {
        losses,
        model_path,
        optim_path,
    })
}
