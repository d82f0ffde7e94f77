//! Plan matrices materialized in a compute dtype.
//!
//! Rows are stored sparsely with `+1` / `-1` entries kept symbolic, so
//! applying a transform costs additions plus [`Scalar::mul_const`] for the
//! remaining constants. General multiplications happen only in the EWMM.

use super::plan::{rat_to_f64, RatMatrix, WinogradPlan};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy)]
enum Coef<T> {
    One,
    NegOne,
    Scale(T),
}

#[derive(Debug, Clone)]
pub(crate) struct Transform<T> {
    rows: usize,
    cols: usize,
    terms: Vec<Vec<(usize, Coef<T>)>>,
}

impl<T: Scalar> Transform<T> {
    fn from_rat(m: &RatMatrix) -> Self {
        let terms = (0..m.rows())
            .map(|i| {
                m.row(i)
                    .iter()
                    .enumerate()
                    .filter_map(|(j, v)| {
                        let v = rat_to_f64(v);
                        let c = if v == 0.0 {
                            return None;
                        } else if v == 1.0 {
                            Coef::One
                        } else if v == -1.0 {
                            Coef::NegOne
                        } else {
                            Coef::Scale(T::from_f64(v))
                        };
                        Some((j, c))
                    })
                    .collect()
            })
            .collect();
        Self { rows: m.rows(), cols: m.cols(), terms }
    }

    /// Multiply along `axis` of a dense row-major array of extents `shape`,
    /// writing into `dst` and updating `shape` in place.
    pub(crate) fn apply_axis(&self, src: &[T], shape: &mut [usize], axis: usize, dst: &mut Vec<T>) {
        debug_assert_eq!(shape[axis], self.cols);
        let outer: usize = shape[..axis].iter().product();
        let inner: usize = shape[axis + 1..].iter().product();
        dst.clear();
        dst.resize(outer * self.rows * inner, T::zero());
        for o in 0..outer {
            let s = &src[o * self.cols * inner..(o + 1) * self.cols * inner];
            let d = &mut dst[o * self.rows * inner..(o + 1) * self.rows * inner];
            for (i, row) in self.terms.iter().enumerate() {
                let out = &mut d[i * inner..(i + 1) * inner];
                for &(j, c) in row {
                    let col = &s[j * inner..(j + 1) * inner];
                    match c {
                        Coef::One => out.iter_mut().zip(col).for_each(|(o, &v)| *o += v),
                        Coef::NegOne => out.iter_mut().zip(col).for_each(|(o, &v)| *o -= v),
                        Coef::Scale(k) => out.iter_mut().zip(col).for_each(|(o, &v)| *o += v.mul_const(k)),
                    }
                }
            }
        }
        shape[axis] = self.rows;
    }

    /// Apply along each of the first `ndim` axes of a hypercube whose
    /// trailing axis of extent `lanes` is left untouched.
    pub(crate) fn apply_cube(&self, src: &[T], ndim: usize, lanes: usize, scratch: &mut Vec<T>, dst: &mut Vec<T>) {
        let mut shape = vec![self.cols; ndim];
        shape.push(lanes);
        dst.clear();
        dst.extend_from_slice(src);
        for axis in 0..ndim {
            self.apply_axis(dst, &mut shape, axis, scratch);
            std::mem::swap(dst, scratch);
        }
    }
}

/// `A^T`, `G` and `B^T` of one plan in dtype `T`.
#[derive(Debug, Clone)]
pub(crate) struct PlanTransforms<T> {
    pub m: usize,
    pub r: usize,
    pub n: usize,
    pub at: Transform<T>,
    pub g: Transform<T>,
    pub bt: Transform<T>,
}

impl<T: Scalar> PlanTransforms<T> {
    pub(crate) fn new(plan: &WinogradPlan) -> Self {
        Self {
            m: plan.m(),
            r: plan.r(),
            n: plan.tile(),
            at: Transform::from_rat(plan.at()),
            g: Transform::from_rat(plan.g()),
            bt: Transform::from_rat(plan.bt()),
        }
    }
}
