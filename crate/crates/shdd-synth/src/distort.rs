//! The five region distortions and their sampling ranges.

use serde::{Deserialize, Serialize};
use tensor_core::Rng;

use crate::buffer::RgbBuffer;
use crate::error::SynthError;
use crate::pink::pink_noise_field;
use crate::region::Region;
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistortionKind {
    GaussianNoise,
    GaussianBlur,
    FNoise,
    ContrastChange,
    Identity,
}

/// Pool order is a dataset contract: region kinds are drawn as uniform
/// indices into this list.
pub const KIND_POOL: [DistortionKind; 5] = [
    DistortionKind::GaussianNoise,
    DistortionKind::GaussianBlur,
    DistortionKind::FNoise,
    DistortionKind::ContrastChange,
    DistortionKind::Identity,
];

impl DistortionKind {
    /// Sampling range for the kind's strength; identity has none.
    /// gaussian-noise: variance; gaussian-blur: variance (sigma squared);
    /// f-noise: 8-bit amplitude scale; contrast-change: percent level.
    pub fn strength_range(self) -> Option<(f64, f64)> {
        match self {
            DistortionKind::GaussianNoise => Some((0.005, 0.02)),
            DistortionKind::GaussianBlur => Some((1.0, 2.5)),
            DistortionKind::FNoise => Some((6.0, 10.0)),
            DistortionKind::ContrastChange => Some((25.0, 40.0)),
            DistortionKind::Identity => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    /// Within the kind's `strength_range`; `None` iff identity.
    pub strength: Option<f64>,
    pub seed: u64,
}

fn checked_strength(spec: &DistortionSpec) -> Result<f64> {
    let (lo, hi) = spec.kind.strength_range().ok_or_else(|| {
        SynthError::invalid("distort_region", "identity takes no strength")
    })?;
    let s = spec.strength.ok_or_else(|| {
        SynthError::invalid("distort_region", format!("{:?} requires a strength", spec.kind))
    })?;
    if !(lo..=hi).contains(&s) {
        return Err(SynthError::invalid(
            "distort_region",
            format!("strength {s} outside [{lo}, {hi}] for {:?}", spec.kind),
        ));
    }
    Ok(s)
}

/// Applies one distortion inside `region`, leaving the rest of the image
/// untouched. Output values in the region are clipped to [0,1].
pub fn distort_region(img: &mut RgbBuffer, region: Region, spec: &DistortionSpec) -> Result<()> {
    if region.x + region.w > img.width() || region.y + region.h > img.height() {
        return Err(SynthError::invalid(
            "distort_region",
            format!(
                "region {region:?} exceeds image {}x{}",
                img.width(),
                img.height()
            ),
        ));
    }
    match spec.kind {
        DistortionKind::Identity => {
            if spec.strength.is_some() {
                return Err(SynthError::invalid(
                    "distort_region",
                    "identity takes no strength",
                ));
            }
            return Ok(());
        }
        DistortionKind::GaussianNoise => {
            let std = checked_strength(spec)?.sqrt();
            let mut rng = Rng::new(spec.seed);
            for c in 0..3 {
                for_region(img, region, c, |v| v + std * rng.next_normal());
            }
        }
        DistortionKind::GaussianBlur => {
            let sigma = checked_strength(spec)?.sqrt();
            blur_region(img, region, sigma);
        }
        DistortionKind::FNoise => {
            let scale = checked_strength(spec)? / 255.0;
            let field = pink_noise_field(region.w, region.h, &mut Rng::new(spec.seed))?;
            for c in 0..3 {
                let mut i = 0;
                for_region(img, region, c, |v| {
                    let out = v + scale * field[i];
                    i += 1;
                    out
                });
            }
        }
        DistortionKind::ContrastChange => {
            let factor = checked_strength(spec)? / 100.0;
            for c in 0..3 {
                for_region(img, region, c, |v| (v - 0.5) * factor + 0.5);
            }
        }
    }
    clip_region(img, region);
    Ok(())
}

/// Applies `f` to every region pixel of channel `c`, in row-major order
/// (that order is part of the noise determinism contract).
fn for_region(img: &mut RgbBuffer, region: Region, c: usize, mut f: impl FnMut(f64) -> f64) {
    let width = img.width();
    let plane = img.plane_mut(c);
    for y in region.y..region.y + region.h {
        for v in &mut plane[y * width + region.x..y * width + region.x + region.w] {
            *v = f(*v);
        }
    }
}

fn clip_region(img: &mut RgbBuffer, region: Region) {
    for c in 0..3 {
        for_region(img, region, c, |v| v.clamp(0.0, 1.0));
    }
}

/// Mirror-with-edge-duplication index fold: ... 2 1 0 | 0 1 2 ... n-1 | n-1 ...
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable Gaussian blur confined to the region, reflect padding at the
/// region borders (the region is treated as its own image).
fn blur_region(img: &mut RgbBuffer, region: Region, sigma: f64) {
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = (region.w, region.h);
    for c in 0..3 {
        let mut patch = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                patch[y * w + x] = img.get(c, region.x + x, region.y + y);
            }
        }
        // Horizontal pass.
        let mut tmp = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let sx = reflect(x as isize + t as isize - radius, w);
                    acc += kv * patch[y * w + sx];
                }
                tmp[y * w + x] = acc;
            }
        }
        // Vertical pass.
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (t, kv) in kernel.iter().enumerate() {
                    let sy = reflect(y as isize + t as isize - radius, h);
                    acc += kv * tmp[sy * w + x];
                }
                img.set(c, region.x + x, region.y + y, acc);
            }
        }
    }
}
