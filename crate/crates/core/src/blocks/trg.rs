//! Temporal residual gradient.
//!
//! A clip of `T` frames becomes `T - 1` adjacent-frame differences followed
//! by the temporal mean. Only additions and one constant scaling by `1/T`
//! are involved, so the block needs no general multiplications.

use crate::error::{shape_err, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor5;

/// Output frame `t < T-1` is `d[t+1] - d[t]`; frame `T-1` is the mean.
///
/// The mean is computed as `d[0] + sum_t (d[t] - d[0]) / T`, which returns a
/// constant clip's value exactly.
pub fn trg_forward<T: Scalar>(input: &Tensor5<T>) -> Result<Tensor5<T>> {
    let [nb, c, t, h, w] = input.dims();
    if t < 2 {
        return shape_err(format!("temporal residuals need at least 2 frames, got {t}"));
    }
    let hw = h * w;
    let inv_t = T::from_f64(1.0 / t as f64);
    let src = input.data();
    let mut out = Tensor5::zeros(input.dims())?;
    let dst = out.data_mut();
    for clip in 0..nb * c {
        let base = clip * t * hw;
        for f in 0..t - 1 {
            let (cur, next) = (base + f * hw, base + (f + 1) * hw);
            for p in 0..hw {
                dst[cur + p] = src[next + p] - src[cur + p];
            }
        }
        let last = base + (t - 1) * hw;
        for p in 0..hw {
            let first = src[base + p];
            let mut offset = T::zero();
            for f in 1..t {
                offset += src[base + f * hw + p] - first;
            }
            dst[last + p] = first + offset.mul_const(inv_t);
        }
    }
    Ok(out)
}
