//! Synthesis of spatially-heterogeneous distortion datasets: images are
//! recursively split into rectangular regions and each region is corrupted
//! by an independently drawn distortion. Everything is driven by explicit
//! seeds; a manifest entry is sufficient to replay any distorted image
//! bit-exactly.

mod buffer;
mod dataset;
mod distort;
mod error;
mod pink;
mod region;

pub use buffer::RgbBuffer;
pub use dataset::{
    generate_dataset, render_entry, sample_entry_regions, synthesize_image, write_synthetic_clean,
    GenerateConfig, GenerateReport, Manifest, ManifestEntry, RegionEntry, ShddLevel,
    MANIFEST_VERSION, TRAIN_VARIANTS,
};
pub use distort::{distort_region, DistortionKind, DistortionSpec, KIND_POOL};
pub use error::SynthError;
pub use pink::{pink_noise_field, radial_power_slope};
pub use region::{split_regions, Region};

pub type Result<T> = std::result::Result<T, SynthError>;
