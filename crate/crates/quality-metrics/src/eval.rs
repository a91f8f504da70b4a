//! Full-frame dataset evaluation with a distorted-input baseline.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use shdd_synth::RgbBuffer;

use crate::error::{io, MetricsError};
use crate::psnr::psnr;
use crate::ssim::ssim;
use crate::Result;

#[derive(Debug, Clone, Serialize)]
pub struct ImageEval {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    pub baseline_psnr: f64,
    pub baseline_ssim: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub split: String,
    pub n: usize,
    pub mean_psnr: f64,
    pub mean_ssim: f64,
    pub baseline_psnr: f64,
    pub baseline_ssim: f64,
    /// Distorted files whose clean counterpart was missing.
    pub skipped: usize,
    pub per_image: Vec<ImageEval>,
}

/// Scores `restore` over every distorted image of `<root>/<split>`, each
/// against its clean source, alongside the do-nothing baseline (the
/// distorted input itself). Images run in parallel; the report lists them
/// in file-name order.
pub fn evaluate_split<F>(root: &Path, split: &str, restore: F) -> Result<EvalReport>
where
    F: Fn(&RgbBuffer) -> std::result::Result<RgbBuffer, String> + Sync,
{
    let dir = root.join(split);
    let mut files: Vec<String> = std::fs::read_dir(&dir)
        .map_err(|e| io(&dir, e))?
        .filter_map(|r| r.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".png"))
        .collect();
    files.sort();

    let mut skipped = 0usize;
    let mut tasks: Vec<(String, std::path::PathBuf, std::path::PathBuf)> = Vec::new();
    for name in files {
        let stem = name.trim_end_matches(".png");
        let source = stem.rsplit_once('_').map(|(s, _)| s).unwrap_or(stem);
        let clean = root.join("clean").join(split).join(format!("{source}.png"));
        if clean.exists() {
            tasks.push((name.clone(), dir.join(&name), clean));
        } else {
            skipped += 1;
        }
    }
    if tasks.is_empty() {
        return Err(MetricsError::InvalidInput(format!(
            "no scoreable images in split {split} ({skipped} skipped)"
        )));
    }

    let per_image: Vec<ImageEval> = tasks
        .par_iter()
        .map(|(name, distorted_path, clean_path)| -> Result<ImageEval> {
            let distorted = RgbBuffer::load_png(distorted_path)?;
            let clean = RgbBuffer::load_png(clean_path)?;
            let restored = restore(&distorted).map_err(|detail| MetricsError::Restore {
                name: name.clone(),
                detail,
            })?;
            Ok(ImageEval {
                name: name.clone(),
                psnr: psnr(&restored, &clean)?,
                ssim: ssim(&restored, &clean)?,
                baseline_psnr: psnr(&distorted, &clean)?,
                baseline_ssim: ssim(&distorted, &clean)?,
            })
        })
        .collect::<Result<_>>()?;

    let n = per_image.len();
    let mean = |f: fn(&ImageEval) -> f64| per_image.iter().map(f).sum::<f64>() / n as f64;
    Ok(EvalReport {
        split: split.to_string(),
        n,
        mean_psnr: mean(|e| e.psnr),
        mean_ssim: mean(|e| e.ssim),
        baseline_psnr: mean(|e| e.baseline_psnr),
        baseline_ssim: mean(|e| e.baseline_ssim),
        skipped,
        per_image,
    })
}
