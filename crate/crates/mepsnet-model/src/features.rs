//! Per-expert activation map export.

use std::path::{Path, PathBuf};

use image::{ImageBuffer, Luma};
use tensor_core::{Element, Graph, Tensor};

use crate::error::ModelError;
use crate::model::MepsNet;
use crate::Result;

/// Writes one grayscale PNG per expert: the channel-mean of the expert's
/// output, min-max normalized. A constant map (e.g. from a zero model)
/// renders as black. Returns the written paths, `expert_0.png` onward.
pub fn dump_expert_features<T: Element>(
    model: &MepsNet<T>,
    input: Tensor<T>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    let shape = input.shape().to_vec();
    let (h, w) = (shape[2], shape[3]);
    let mut g = Graph::new();
    let pass = model.forward(&mut g, input)?;

    std::fs::create_dir_all(out_dir).map_err(|e| ModelError::io(out_dir, e))?;
    let mut paths = Vec::new();
    for (k, &id) in pass.expert_outputs.iter().enumerate() {
        let t = g.value(id);
        let c = t.shape()[1];
        let plane = h * w;
        let mut mean = vec![0.0f64; plane];
        for ci in 0..c {
            for (m, v) in mean.iter_mut().zip(&t.data()[ci * plane..(ci + 1) * plane]) {
                *m += v.into_f64();
            }
        }
        for m in &mut mean {
            *m /= c as f64;
        }
        let lo = mean.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = mean.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = if hi > lo { 255.0 / (hi - lo) } else { 0.0 };

        let mut img: ImageBuffer<Luma<u8>, Vec<u8>> = ImageBuffer::new(w as u32, h as u32);
        for (i, px) in img.pixels_mut().enumerate() {
            px.0[0] = ((mean[i] - lo) * scale).round() as u8;
        }
        let path = out_dir.join(format!("expert_{k}.png"));
        img.save(&path)
            .map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))?;
        paths.push(path);
    }
    Ok(paths)
}
