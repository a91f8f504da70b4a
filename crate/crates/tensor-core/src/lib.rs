//! Minimal deterministic tensor library with reverse-mode automatic
//! differentiation.
//!
//! The op set is intentionally small: dense NCHW convolution, the pointwise
//! and shape operations needed by a convolutional restoration network,
//! template mixing for soft parameter sharing, and an L2 loss. Everything is
//! CPU-only and single-threaded per graph. Dual precision is supported via
//! the [`Element`] trait: `f32` for training, `f64` for gradient
//! verification against finite differences.

mod conv;
mod error;
mod fd;
mod graph;
mod rng;
mod tensor;

pub use error::TensorError;
pub use fd::{finite_diff_grad, max_relative_error};
pub use graph::{Graph, TensorId};
pub use rng::Rng;
pub use tensor::{Element, Tensor};

pub type Result<T> = std::result::Result<T, TensorError>;
