//! Restoration quality metrics: PSNR and SSIM over [0,1] RGB images, plus
//! whole-split evaluation with a distorted-input baseline.

mod error;
mod eval;
mod psnr;
mod ssim;

pub use error::MetricsError;
pub use eval::{evaluate_split, EvalReport, ImageEval};
pub use psnr::{mse, psnr, PSNR_CAP_DB};
pub use ssim::{ssim, SSIM_SIGMA, SSIM_WINDOW};

pub type Result<T, E = MetricsError> = std::result::Result<T, E>;
