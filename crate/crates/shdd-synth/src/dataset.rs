//! Dataset synthesis: per-image variant generation, manifest, directory
//! layout, and a synthetic clean-image source for runs without a real
//! photographic corpus.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tensor_core::Rng;

use crate::buffer::RgbBuffer;
use crate::distort::{distort_region, DistortionKind, DistortionSpec, KIND_POOL};
use crate::error::SynthError;
use crate::region::{split_regions, Region};
use crate::Result;

pub const MANIFEST_VERSION: u32 = 1;
pub const TRAIN_VARIANTS: u32 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShddLevel {
    Easy,
    Moderate,
    Difficult,
}

impl ShddLevel {
    pub fn chops(self) -> usize {
        match self {
            ShddLevel::Easy => 2,
            ShddLevel::Moderate => 3,
            ShddLevel::Difficult => 4,
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "easy" => Ok(ShddLevel::Easy),
            "moderate" => Ok(ShddLevel::Moderate),
            "difficult" => Ok(ShddLevel::Difficult),
            other => Err(SynthError::invalid(
                "level",
                format!("unknown level '{other}' (easy|moderate|difficult)"),
            )),
        }
    }
}

impl fmt::Display for ShddLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShddLevel::Easy => "easy",
            ShddLevel::Moderate => "moderate",
            ShddLevel::Difficult => "difficult",
        };
        f.write_str(s)
    }
}

/// One distorted region in a manifest: rectangle plus the distortion that
/// was applied to it. Holds everything needed to replay the pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionEntry {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub kind: DistortionKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub strength: Option<f64>,
    pub seed: u64,
}

impl RegionEntry {
    pub fn region(&self) -> Region {
        Region { x: self.x, y: self.y, w: self.w, h: self.h }
    }

    pub fn spec(&self) -> DistortionSpec {
        DistortionSpec { kind: self.kind, strength: self.strength, seed: self.seed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: String,
    pub split: String,
    pub variant: u32,
    pub regions: Vec<RegionEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub master_seed: u64,
    pub level: ShddLevel,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).map_err(|e| SynthError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| SynthError::io(path, e))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// The per-variant RNG stream. (master seed, image id, variant) pins it
/// completely, which is what makes generation order-independent.
fn variant_rng(master_seed: u64, image_id: &str, variant: u32) -> Rng {
    let image_seed = Rng::child_seed(master_seed, fnv1a(image_id.as_bytes()));
    Rng::child(image_seed, variant as u64)
}

/// Draws the region layout and one distortion per region. Per region the
/// draw order is kind index, strength (skipped for identity), field seed.
pub fn sample_entry_regions(
    width: usize,
    height: usize,
    image_id: &str,
    level: ShddLevel,
    variant: u32,
    master_seed: u64,
) -> Result<Vec<RegionEntry>> {
    let mut rng = variant_rng(master_seed, image_id, variant);
    let regions = split_regions(width, height, level.chops(), &mut rng)?;
    let mut out = Vec::with_capacity(regions.len());
    for r in regions {
        let kind = KIND_POOL[rng.next_below(KIND_POOL.len() as u64) as usize];
        let strength = kind.strength_range().map(|(lo, hi)| rng.uniform(lo, hi));
        let seed = rng.next_u64();
        out.push(RegionEntry {
            x: r.x,
            y: r.y,
            w: r.w,
            h: r.h,
            kind,
            strength,
            seed,
        });
    }
    Ok(out)
}

/// Replays manifest regions onto a clean image.
pub fn render_entry(clean: &RgbBuffer, regions: &[RegionEntry]) -> Result<RgbBuffer> {
    let mut img = clean.clone();
    for entry in regions {
        distort_region(&mut img, entry.region(), &entry.spec())?;
    }
    Ok(img)
}

pub fn synthesize_image(
    clean: &RgbBuffer,
    image_id: &str,
    level: ShddLevel,
    variant: u32,
    master_seed: u64,
) -> Result<(RgbBuffer, Vec<RegionEntry>)> {
    let regions = sample_entry_regions(
        clean.width(),
        clean.height(),
        image_id,
        level,
        variant,
        master_seed,
    )?;
    let img = render_entry(clean, &regions)?;
    Ok((img, regions))
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub clean_dir: PathBuf,
    pub out_dir: PathBuf,
    pub level: ShddLevel,
    pub master_seed: u64,
    /// 0 means the library default.
    pub threads: usize,
    /// Explicit split sizes; when `None`, roughly 80/10/10 by sorted
    /// filename order.
    pub train_count: Option<usize>,
    pub val_count: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerateReport {
    pub images: usize,
    pub train_images: usize,
    pub val_images: usize,
    pub test_images: usize,
    pub variants_written: usize,
    pub warnings: usize,
    pub manifest_path: PathBuf,
}

const SPLITS: [&str; 3] = ["train", "val", "test"];

fn split_sizes(n: usize, cfg: &GenerateConfig) -> Result<(usize, usize, usize)> {
    let (train, val) = match (cfg.train_count, cfg.val_count) {
        (Some(t), Some(v)) => (t, v),
        (Some(t), None) => (t, (n.saturating_sub(t)).div_ceil(2)),
        (None, Some(v)) => ((n * 8 + 5) / 10, v),
        (None, None) => {
            let t = (n * 8 + 5) / 10;
            (t, (n - t).div_ceil(2))
        }
    };
    if train + val > n {
        return Err(SynthError::invalid(
            "generate_dataset",
            format!("split counts train={train} val={val} exceed {n} images"),
        ));
    }
    Ok((train, val, n - train - val))
}

/// Synthesizes the dataset directory: distorted PNGs under
/// `<out>/<split>/`, re-encoded clean copies under `<out>/clean/<split>/`,
/// and `manifest.json`. Train images get [`TRAIN_VARIANTS`] variants each,
/// val and test one. Returns counts and the number of skipped inputs.
pub fn generate_dataset(cfg: &GenerateConfig) -> Result<GenerateReport> {
    let mut names: Vec<String> = fs::read_dir(&cfg.clean_dir)
        .map_err(|e| SynthError::io(&cfg.clean_dir, e))?
        .filter_map(|entry| {
            let entry = entry.ok()?;
            let name = entry.file_name().into_string().ok()?;
            name.to_ascii_lowercase().ends_with(".png").then_some(name)
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(SynthError::invalid(
            "generate_dataset",
            format!("no PNG images in {}", cfg.clean_dir.display()),
        ));
    }

    let mut warnings = 0usize;
    let mut images: Vec<(String, RgbBuffer)> = Vec::with_capacity(names.len());
    for name in names {
        let path = cfg.clean_dir.join(&name);
        match RgbBuffer::load_png(&path) {
            Ok(img) => {
                let stem = name.trim_end_matches(".png").trim_end_matches(".PNG");
                images.push((stem.to_string(), img));
            }
            Err(e) => {
                eprintln!("warning: skipping {}: {e}", path.display());
                warnings += 1;
            }
        }
    }
    if images.is_empty() {
        return Err(SynthError::invalid(
            "generate_dataset",
            "no decodable PNG images",
        ));
    }

    let (n_train, n_val, n_test) = split_sizes(images.len(), cfg)?;
    let split_of = |i: usize| -> &'static str {
        if i < n_train {
            "train"
        } else if i < n_train + n_val {
            "val"
        } else {
            "test"
        }
    };

    for split in SPLITS {
        fs::create_dir_all(cfg.out_dir.join(split))
            .map_err(|e| SynthError::io(cfg.out_dir.join(split), e))?;
        fs::create_dir_all(cfg.out_dir.join("clean").join(split))
            .map_err(|e| SynthError::io(cfg.out_dir.join("clean").join(split), e))?;
    }
    for (i, (stem, img)) in images.iter().enumerate() {
        let path = cfg
            .out_dir
            .join("clean")
            .join(split_of(i))
            .join(format!("{stem}.png"));
        img.save_png(&path)?;
    }

    struct Task {
        image_idx: usize,
        split: &'static str,
        variant: u32,
    }
    let mut tasks = Vec::new();
    for (i, _) in images.iter().enumerate() {
        let split = split_of(i);
        let variants = if split == "train" { TRAIN_VARIANTS } else { 1 };
        for v in 0..variants {
            tasks.push(Task { image_idx: i, split, variant: v });
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| SynthError::invalid("generate_dataset", e.to_string()))?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        use rayon::prelude::*;
        tasks
            .par_iter()
            .map(|task| -> Result<ManifestEntry> {
                let (stem, clean) = &images[task.image_idx];
                let (img, regions) =
                    synthesize_image(clean, stem, cfg.level, task.variant, cfg.master_seed)?;
                let path = cfg
                    .out_dir
                    .join(task.split)
                    .join(format!("{stem}_{}.png", task.variant));
                img.save_png(&path)?;
                Ok(ManifestEntry {
                    source: stem.clone(),
                    split: task.split.to_string(),
                    variant: task.variant,
                    regions,
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let manifest = Manifest {
        version: MANIFEST_VERSION,
        master_seed: cfg.master_seed,
        level: cfg.level,
        entries,
    };
    let manifest_path = cfg.out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;

    Ok(GenerateReport {
        images: images.len(),
        train_images: n_train,
        val_images: n_val,
        test_images: n_test,
        variants_written: tasks.len(),
        warnings,
        manifest_path,
    })
}

/// Writes `count` deterministic synthetic clean images named `clean_<i>.png`.
/// A stand-in corpus so the full pipeline runs without photographic data.
///
/// Each image is a smooth color gradient with a faint long-wavelength ripple.
/// Deliberately low-frequency: on content like this the synthetic distortions
/// stay clearly visible instead of hiding in texture, which keeps small-scale
/// training and evaluation runs meaningful.
pub fn write_synthetic_clean(
    dir: &Path,
    count: usize,
    size: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| SynthError::io(dir, e))?;
    let mut paths = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = Rng::child(seed, i as u64);
        let img = synthetic_image(size, &mut rng);
        let path = dir.join(format!("clean_{i:02}.png"));
        img.save_png(&path)?;
        paths.push(path);
    }
    Ok(paths)
}

fn synthetic_image(size: usize, rng: &mut Rng) -> RgbBuffer {
    let mut img = RgbBuffer::new(size, size);
    let theta = rng.uniform(0.0, std::f64::consts::TAU);
    let (dx, dy) = (theta.cos(), theta.sin());
    let lo: [f64; 3] = std::array::from_fn(|_| rng.uniform(0.10, 0.40));
    let hi: [f64; 3] = std::array::from_fn(|_| rng.uniform(0.60, 0.90));
    let amp = rng.uniform(0.005, 0.015);
    let wavelength = rng.uniform(40.0, 80.0);
    let ripple_theta = rng.uniform(0.0, std::f64::consts::TAU);
    let (rx, ry) = (ripple_theta.cos() / wavelength, ripple_theta.sin() / wavelength);
    let phase = rng.uniform(0.0, std::f64::consts::TAU);

    let half_diag = (size as f64) * std::f64::consts::SQRT_2 / 2.0;
    let mid = size as f64 / 2.0;
    for y in 0..size {
        for x in 0..size {
            let proj = ((x as f64 - mid) * dx + (y as f64 - mid) * dy) / half_diag;
            let t = ((proj + 1.0) / 2.0).clamp(0.0, 1.0);
            let ripple =
                amp * (std::f64::consts::TAU * (rx * x as f64 + ry * y as f64) + phase).sin();
            for c in 0..3 {
                let v = lo[c] + (hi[c] - lo[c]) * t + ripple;
                img.set(c, x, y, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}
