//! Patch sampling over a generated dataset split.

use std::path::Path;

use shdd_synth::RgbBuffer;
use tensor_core::{Element, Rng, Tensor};

use crate::error::{io, TrainError};
use crate::Result;

/// Distorted/clean image pairs held in memory, sorted by file name.
pub struct TrainSet {
    pairs: Vec<(RgbBuffer, RgbBuffer)>,
    names: Vec<String>,
}

impl TrainSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn pair(&self, i: usize) -> (&RgbBuffer, &RgbBuffer) {
        (&self.pairs[i].0, &self.pairs[i].1)
    }

    pub fn from_pairs(pairs: Vec<(RgbBuffer, RgbBuffer)>) -> Self {
        let names = (0..pairs.len()).map(|i| format!("pair_{i}")).collect();
        TrainSet { pairs, names }
    }
}

/// Loads every `<root>/<split>/<stem>_<v>.png` with its clean counterpart
/// `<root>/clean/<split>/<stem>.png`. A distorted image without a clean
/// source is a dataset defect, not a skippable entry.
pub fn load_split(root: &Path, split: &str) -> Result<TrainSet> {
    let dir = root.join(split);
    let mut files: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| io(&dir, e))?
        .filter_map(|r| r.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(TrainError::InvalidInput(format!(
            "no png files under {}",
            dir.display()
        )));
    }

    let mut pairs = Vec::with_capacity(files.len());
    for name in &files {
        let stem = name.trim_end_matches(".png");
        let source = stem.rsplit_once('_').map(|(s, _)| s).unwrap_or(stem);
        let clean_path = root.join("clean").join(split).join(format!("{source}.png"));
        let distorted = RgbBuffer::load_png(&dir.join(name))?;
        let clean = RgbBuffer::load_png(&clean_path)?;
        if (clean.width(), clean.height()) != (distorted.width(), distorted.height()) {
            return Err(TrainError::InvalidInput(format!(
                "{name}: clean and distorted sizes differ"
            )));
        }
        pairs.push((distorted, clean));
    }
    Ok(TrainSet {
        pairs,
        names: files,
    })
}

/// Draws `batch` aligned patch pairs: uniform image, uniform top-left corner
/// (row before column), the same crop cut from both the distorted and the
/// clean frame. Undersized images are redrawn.
pub fn sample_patch_batch<T: Element>(
    set: &TrainSet,
    patch: usize,
    batch: usize,
    rng: &mut Rng,
) -> Result<(Tensor<T>, Tensor<T>)> {
    if set.is_empty() {
        return Err(TrainError::InvalidInput("empty training set".into()));
    }
    if !set
        .pairs
        .iter()
        .any(|(d, _)| d.width() >= patch && d.height() >= patch)
    {
        return Err(TrainError::InvalidInput(format!(
            "no training image is at least {patch}x{patch}"
        )));
    }

    let plane = patch * patch;
    let mut x_data = vec![T::from_f64(0.0); batch * 3 * plane];
    let mut y_data = vec![T::from_f64(0.0); batch * 3 * plane];
    for b in 0..batch {
        let (distorted, clean) = loop {
            let i = rng.next_below(set.pairs.len() as u64) as usize;
            let (d, c) = (&set.pairs[i].0, &set.pairs[i].1);
            if d.width() >= patch && d.height() >= patch {
                break (d, c);
            }
        };
        let top = rng.next_below((distorted.height() - patch + 1) as u64) as usize;
        let left = rng.next_below((distorted.width() - patch + 1) as u64) as usize;
        for c in 0..3 {
            let dp = distorted.plane(c);
            let cp = clean.plane(c);
            for yy in 0..patch {
                let src = (top + yy) * distorted.width() + left;
                let dst = (b * 3 + c) * plane + yy * patch;
                for xx in 0..patch {
                    x_data[dst + xx] = T::from_f64(dp[src + xx]);
                    y_data[dst + xx] = T::from_f64(cp[src + xx]);
                }
            }
        }
    }
    let shape = vec![batch, 3, patch, patch];
    Ok((
        Tensor::new(shape.clone(), x_data)?,
        Tensor::new(shape, y_data)?,
    ))
}
