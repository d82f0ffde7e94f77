//! Dense five-axis tensors in (batch, channel, time, height, width) order.

mod io;

pub use io::{read_t5df, read_t5df_from, write_t5df, write_t5df_to, DynTensor};

use std::ops::{Index, IndexMut};

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{shape_err, Error, Result};
use crate::scalar::Scalar;

/// Extents of a tensor: `[batch, channels, time, height, width]`.
pub type Dims = [usize; 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DType {
    F32,
    F64,
}

impl DType {
    pub fn code(self) -> u16 {
        match self {
            DType::F32 => 1,
            DType::F64 => 2,
        }
    }

    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            1 => Some(DType::F32),
            2 => Some(DType::F64),
            _ => None,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

/// A scalar type with a storage dtype and little-endian encoding.
pub trait Element: Scalar {
    const DTYPE: DType;
    fn write_le(self, out: &mut Vec<u8>);
    fn read_le(bytes: &[u8]) -> Self;
}

impl Element for f32 {
    const DTYPE: DType = DType::F32;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f32::from_le_bytes(bytes.try_into().expect("4-byte chunk"))
    }
}

impl Element for f64 {
    const DTYPE: DType = DType::F64;
    fn write_le(self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.to_le_bytes());
    }
    fn read_le(bytes: &[u8]) -> Self {
        f64::from_le_bytes(bytes.try_into().expect("8-byte chunk"))
    }
}

/// Number of elements for `dims`, or a size error on overflow.
pub fn numel(dims: Dims) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n <= isize::MAX as usize)
        .ok_or_else(|| Error::Size { dims: dims.to_vec() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor5<T> {
    dims: Dims,
    data: Vec<T>,
}

impl<T: Scalar> Tensor5<T> {
    pub fn new(dims: Dims, fill: T) -> Result<Self> {
        let n = numel(dims)?;
        Ok(Self { dims, data: vec![fill; n] })
    }

    pub fn zeros(dims: Dims) -> Result<Self> {
        Self::new(dims, T::zero())
    }

    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        let n = numel(dims)?;
        if data.len() != n {
            return shape_err(format!("{} elements do not fill dims {dims:?} ({n} expected)", data.len()));
        }
        Ok(Self { dims, data })
    }

    /// Uniform values in `[-1, 1]` from a seeded xoshiro256** stream.
    ///
    /// The generator is seeded with `Xoshiro256StarStar::seed_from_u64`
    /// (SplitMix64 expansion). Each element consumes one 64-bit draw `x`
    /// and takes the value `2 * (x >> 11) * 2^-53 - 1`, computed in `f64`
    /// and then converted to `T`, so output depends only on seed and dims.
    pub fn random(dims: Dims, seed: u64) -> Result<Self> {
        let n = numel(dims)?;
        let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
        let data = (0..n).map(|_| T::from_f64(unit_interval(&mut rng))).collect();
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn offset(&self, idx: Dims) -> usize {
        let [_, c, t, h, w] = self.dims;
        (((idx[0] * c + idx[1]) * t + idx[2]) * h + idx[3]) * w + idx[4]
    }

    /// Inverse of [`Tensor5::offset`].
    pub fn index_of(&self, mut flat: usize) -> Dims {
        let mut idx = [0; 5];
        for axis in (0..5).rev() {
            let d = self.dims[axis];
            idx[axis] = flat % d;
            flat /= d;
        }
        idx
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Tensor5<U> {
        Tensor5 { dims: self.dims, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        check_same_dims(self.dims, other.dims)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { dims: self.dims, data })
    }

    pub fn cast<U: Scalar>(&self) -> Tensor5<U> {
        self.map(|v| U::from_f64(v.to_f64()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.to_f64().abs()))
    }

    /// Copy with zero borders: `pad[i]` elements on both sides of time,
    /// height and width.
    pub fn zero_pad(&self, pad: [usize; 3]) -> Result<Self> {
        self.zero_pad_to(pad, [self.dims[2] + 2 * pad[0], self.dims[3] + 2 * pad[1], self.dims[4] + 2 * pad[2]])
    }

    /// Place the tensor at offset `lead` inside a zero tensor of spatial
    /// extents `extent`, truncating whatever falls past the far edge.
    pub fn zero_pad_to(&self, lead: [usize; 3], extent: [usize; 3]) -> Result<Self> {
        let [nb, c, t, h, w] = self.dims;
        let mut out = Self::zeros([nb, c, extent[0], extent[1], extent[2]])?;
        let tt = t.min(extent[0].saturating_sub(lead[0]));
        let hh = h.min(extent[1].saturating_sub(lead[1]));
        let ww = w.min(extent[2].saturating_sub(lead[2]));
        for b in 0..nb {
            for ch in 0..c {
                for ti in 0..tt {
                    for y in 0..hh {
                        let src = self.offset([b, ch, ti, y, 0]);
                        let dst = out.offset([b, ch, ti + lead[0], y + lead[1], lead[2]]);
                        out.data[dst..dst + ww].copy_from_slice(&self.data[src..src + ww]);
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<T> Index<Dims> for Tensor5<T>
where
    T: Scalar,
{
    type Output = T;
    #[inline]
    fn index(&self, idx: Dims) -> &T {
        &self.data[self.offset(idx)]
    }
}

impl<T: Scalar> IndexMut<Dims> for Tensor5<T> {
    #[inline]
    fn index_mut(&mut self, idx: Dims) -> &mut T {
        let o = self.offset(idx);
        &mut self.data[o]
    }
}

fn unit_interval(rng: &mut Xoshiro256StarStar) -> f64 {
    let u = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}

pub(crate) fn check_same_dims(a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return shape_err(format!("dims differ: {a:?} vs {b:?}"));
    }
    Ok(())
}

/// Outcome of [`allclose`].
#[derive(Debug, Clone, PartialEq)]
pub struct Closeness {
    pub close: bool,
    /// Largest `|a_i - b_i|`.
    pub max_error: f64,
    /// Index where `max_error` occurs; `None` for empty tensors.
    pub argmax: Option<Dims>,
}

/// `true` iff `|a_i - b_i| <= abs_tol + rel_tol * max(|a_i|, |b_i|)` for all i.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn allclose<T: Scalar>(a: &Tensor5<T>, b: &Tensor5<T>, rel_tol: f64, abs_tol: f64) -> Result<Closeness> {
    check_same_dims(a.dims, b.dims)?;
    let mut close = true;
    let mut max_error = 0.0f64;
    let mut argmax = None;
    for (i, (&x, &y)) in a.data.iter().zip(&b.data).enumerate() {
        let (x, y) = (x.to_f64(), y.to_f64());
        let err = (x - y).abs();
        // NaN anywhere is never close.
        if !(err <= abs_tol + rel_tol * x.abs().max(y.abs())) {
            close = false;
        }
        if argmax.is_none() || err > max_error || err.is_nan() && !max_error.is_nan() {
            max_error = err;
            argmax = Some(a.index_of(i));
        }
    }
    Ok(Closeness { close, max_error, argmax })
}

/// Largest element-wise error of `actual` against `expected`, relative to
/// `max(|a_i|, |b_i|) + max_j |b_j|`.
///
/// The scale term keeps near-zero outputs (cancellation) from dominating.
/// `scaled_rel_error(a, b) <= tol` holds exactly when
/// `allclose(a, b, tol, tol * max_j |b_j|)` does.
pub fn scaled_rel_error<T: Scalar>(actual: &Tensor5<T>, expected: &Tensor5<T>) -> Result<f64> {
    check_same_dims(actual.dims, expected.dims)?;
    let scale = expected.max_abs();
    let mut worst = 0.0f64;
    for (&x, &y) in actual.data.iter().zip(&expected.data) {
        let (x, y) = (x.to_f64(), y.to_f64());
        let denom = x.abs().max(y.abs()) + scale;
        let err = if denom == 0.0 { (x - y).abs() } else { (x - y).abs() / denom };
        if err.is_nan() {
            return Ok(f64::NAN);
        }
        worst = worst.max(err);
    }
    Ok(worst)
}
