//! Numeric element types shared by every kernel.
//!
//! Kernels are generic over [`Scalar`]. Besides `f32` and `f64` there is
//! [`Counted`], an `f64` shadow type that tallies operations on a
//! thread-local counter so multiplication budgets can be checked on the real
//! code paths instead of on a separate model of them.

use std::cell::Cell;
use std::fmt::Debug;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

pub trait Scalar:
    Copy
    + Default
    + PartialOrd
    + Debug
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    fn zero() -> Self;
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Multiply by a constant fixed ahead of time (a transform-matrix entry
    /// or a reciprocal frame count). Hardware realizes these with shifts and
    /// adds, so they are not general multiplications.
    #[inline]
    fn mul_const(self, c: Self) -> Self {
        self * c
    }
}

impl Scalar for f32 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn zero() -> Self {
        0.0
    }
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

thread_local! {
    static MULTS: Cell<u64> = const { Cell::new(0) };
    static CONST_MULTS: Cell<u64> = const { Cell::new(0) };
}

/// Operation tallies collected by [`count_ops`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OpCounts {
    /// Products of two data-dependent operands.
    pub mults: u64,
    /// Products with a precomputed constant.
    pub const_mults: u64,
}

/// `f64` that counts its multiplications.
#[derive(Debug, Clone, Copy, Default, PartialEq, PartialOrd)]
pub struct Counted(pub f64);

impl Add for Counted {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        Counted(self.0 + rhs.0)
    }
}

impl Sub for Counted {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        Counted(self.0 - rhs.0)
    }
}

impl Mul for Counted {
    type Output = Self;
    #[inline]
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn mul(self, rhs: Self) -> Self {
        MULTS.with(|c| c.set(c.get() + 1));
        Counted(self.0 * rhs.0)
    }
}

impl Neg for Counted {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Counted(-self.0)
    }
}

impl AddAssign for Counted {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        self.0 += rhs.0;
    }
}

impl SubAssign for Counted {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        self.0 -= rhs.0;
    }
}

impl Scalar for Counted {
    fn zero() -> Self {
        Counted(0.0)
    }
    fn from_f64(v: f64) -> Self {
        Counted(v)
    }
    fn to_f64(self) -> f64 {
        self.0
    }
    fn mul_const(self, c: Self) -> Self {
        CONST_MULTS.with(|n| n.set(n.get() + 1));
        Counted(self.0 * c.0)
    }
}

/// Run `f` and return the operations [`Counted`] values performed on this
/// thread while it ran.
pub fn count_ops<R>(f: impl FnOnce() -> R) -> (R, OpCounts) {
    let before = snapshot();
    let out = f();
    let after = snapshot();
    (out, OpCounts { mults: after.mults - before.mults, const_mults: after.const_mults - before.const_mults })
}

fn snapshot() -> OpCounts {
    OpCounts { mults: MULTS.with(Cell::get), const_mults: CONST_MULTS.with(Cell::get) }
}
