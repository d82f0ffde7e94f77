//! Winograd minimal-filtering convolution.
//!
//! [`WinogradPlan`] holds exact rational transforms for F(m, r). The tile
//! functions apply one plan to a single tile; the `wino_conv*` functions tile
//! whole feature maps, and [`hfa_fsb_forward`] chains the 1D and 2D paths
//! through an FSB.

mod conv;
mod plan;
mod tile;
mod transform;

pub use conv::{hfa_fsb_forward, wino_conv1d_temporal, wino_conv2d_depthwise, wino_conv3d};
pub use plan::{HybridPlan, RatMatrix, Rational, WinogradPlan, CANONICAL_POINTS, MAX_TILE};
pub use tile::{wino1d_tile, wino2d_tile, wino3d_tile};
