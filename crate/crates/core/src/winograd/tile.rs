//! Single-tile Winograd kernels.
//!
//! All three share one shape: transform the kernel with `G` and the input
//! tile with `B^T` along every axis, multiply element-wise, then bring the
//! product back with `A^T` along every axis. In 2D that is
//! `A^T [(G g G^T) . (B^T d B)] A`; in 3D the same transforms are applied
//! mode by mode along time, height and width.

use super::plan::WinogradPlan;
use super::transform::PlanTransforms;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

fn tile_nd<T: Scalar>(plan: &WinogradPlan, g: &[T], d: &[T], ndim: usize) -> Result<Vec<T>> {
    let tf = PlanTransforms::<T>::new(plan);
    let (r, n) = (tf.r, tf.n);
    if g.len() != r.pow(ndim as u32) {
        return shape_err(format!("kernel has {} elements, F({},{}) needs {}", g.len(), tf.m, r, r.pow(ndim as u32)));
    }
    if d.len() != n.pow(ndim as u32) {
        return shape_err(format!(
            "input tile has {} elements, F({},{}) needs {}",
            d.len(),
            tf.m,
            r,
            n.pow(ndim as u32)
        ));
    }
    let (mut u, mut v, mut scratch) = (Vec::new(), Vec::new(), Vec::new());
    tf.g.apply_cube(g, ndim, 1, &mut scratch, &mut u);
    tf.bt.apply_cube(d, ndim, 1, &mut scratch, &mut v);
    let w: Vec<T> = u.iter().zip(&v).map(|(&a, &b)| a * b).collect();
    let mut y = Vec::new();
    tf.at.apply_cube(&w, ndim, 1, &mut scratch, &mut y);
    Ok(y)
}

/// F(m, r): `m` outputs of an `r`-tap correlation over `m + r - 1` inputs.
pub fn wino1d_tile<T: Scalar>(plan: &WinogradPlan, g: &[T], d: &[T]) -> Result<Vec<T>> {
    tile_nd(plan, g, d, 1)
}

/// F(m x m, r x r) on row-major square tiles.
pub fn wino2d_tile<T: Scalar>(plan: &WinogradPlan, g: &[T], d: &[T]) -> Result<Vec<T>> {
    tile_nd(plan, g, d, 2)
}

/// F(m x m x m, r x r x r) on row-major cubic tiles.
pub fn wino3d_tile<T: Scalar>(plan: &WinogradPlan, g: &[T], d: &[T]) -> Result<Vec<T>> {
    tile_nd(plan, g, d, 3)
}
