//! MEPSNet: a mixture-of-experts restoration network whose expert
//! convolutions do not own weights. Instead a single global template bank
//! holds K weight tensors and every shared convolution stores only a
//! K-vector of mixing coefficients; its working weight is the linear
//! combination of the templates. Expert outputs are concatenated, gated by
//! channel attention, and reconstructed to RGB.

mod checkpoint;
mod config;
mod error;
mod features;
mod model;
mod params;
mod verify;

pub use checkpoint::{
    load_model, read_container, save_model, write_container, FORMAT_VERSION, MAGIC,
};
pub use config::MepsNetConfig;
pub use error::ModelError;
pub use features::dump_expert_features;
pub use model::{ForwardPass, MepsNet};
pub use params::{Census, ParamSet};
pub use verify::{grad_audit, GradAuditReport, AUDIT_EPS, AUDIT_FLOOR};

pub type Result<T> = std::result::Result<T, ModelError>;
