//! Separable 3D convolution kernels for video models.
//!
//! - [`tensor`]: five-axis tensors and the T5DF file format.
//! - [`direct`]: reference loop-nest convolutions.
//! - [`winograd`]: Cook-Toom plans and fast tiled convolutions.
//! - [`blocks`]: the fully separable block, temporal residual gradients and
//!   JSON layer stacks.
//! - [`analyzer`]: exact parameter and multiplication counts.
//! - [`verify`], [`bench`], [`cli`]: the command-line tool.

pub mod analyzer;
pub mod bench;
pub mod blocks;
pub mod cli;
pub mod direct;
pub mod error;
pub mod scalar;
pub mod tensor;
pub mod verify;
pub mod winograd;

pub use error::{Error, Result};
pub use tensor::Tensor5;
