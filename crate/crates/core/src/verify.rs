//! Seeded randomized equivalence suites.
//!
//! Every case draws a shape, operands and plan from one xoshiro stream per
//! suite, so a `(suite, seed, cases, dtype)` tuple always replays the same
//! work and prints the same numbers.

use std::fmt::Write as _;

use rand_xoshiro::rand_core::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

use crate::blocks::{fsb_forward, trg_forward, FsbWeights};
use crate::direct::{conv1d_temporal, conv2d_depthwise, conv3d_direct, ConvGeometry};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{scaled_rel_error, DType, Tensor5};
use crate::winograd::{
    hfa_fsb_forward, wino_conv1d_temporal, wino_conv2d_depthwise, wino_conv3d, HybridPlan, WinogradPlan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Wino1d,
    Wino2d,
    Wino3d,
    Fsb,
    Hfa,
    Trg,
}

impl Suite {
    pub const ALL: [Suite; 6] = [Suite::Wino1d, Suite::Wino2d, Suite::Wino3d, Suite::Fsb, Suite::Hfa, Suite::Trg];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Wino1d => "wino1d",
            Suite::Wino2d => "wino2d",
            Suite::Wino3d => "wino3d",
            Suite::Fsb => "fsb",
            Suite::Hfa => "hfa",
            Suite::Trg => "trg",
        }
    }

    /// Largest accepted error for `dtype`.
    pub fn tolerance(self, dtype: DType) -> f64 {
        match (self, dtype) {
            (Suite::Trg, DType::F64) => 1e-12,
            (Suite::Trg, DType::F32) => 1e-5,
            (_, DType::F64) => 1e-9,
            (_, DType::F32) => 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub suite: Suite,
    pub cases: usize,
    pub max_error: f64,
    pub tolerance: f64,
    /// Index and description of the worst case.
    pub worst: Option<(usize, String)>,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.max_error <= self.tolerance
    }
}

struct Draw(Xoshiro256StarStar);

impl Draw {
    fn new(seed: u64, suite: Suite) -> Self {
        let salt = Suite::ALL.iter().position(|&s| s == suite).unwrap_or(0) as u64;
        Draw(Xoshiro256StarStar::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
    }

    /// Uniform in `lo..=hi`.
    fn int(&mut self, lo: usize, hi: usize) -> usize {
        lo + (self.0.next_u64() % (hi - lo + 1) as u64) as usize
    }

    fn pick<T: Copy>(&mut self, items: &[T]) -> T {
        items[self.int(0, items.len() - 1)]
    }

    fn seed(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Extent in `1..=16` that still fits a kernel of `k` under padding `p`.
    fn extent(&mut self, k: usize, p: usize) -> usize {
        self.int((k.saturating_sub(2 * p)).max(1), 16)
    }

    /// Output tile `m` such that F(m, r) exists.
    fn tile(&mut self, r: usize) -> usize {
        let hi = 4.min(9 - r);
        self.int(2, hi)
    }
}

type Case = (f64, String);

fn wino1d_case<T: Scalar>(d: &mut Draw) -> Result<Case> {
    let k = d.pick(&[2, 3, 5]);
    let m = d.tile(k);
    let p = d.int(0, k / 2);
    let (c, n) = (d.int(1, 8), d.int(1, 16));
    let dims = [1, c, d.extent(k, p), d.int(1, 16), d.int(1, 16)];
    let x = Tensor5::<T>::random(dims, d.seed())?;
    let g = Tensor5::<T>::random([n, c, k, 1, 1], d.seed())?;
    let fast = wino_conv1d_temporal(&x, &g, &WinogradPlan::new(m, k)?, p)?;
    let slow = conv1d_temporal(&x, &g, &ConvGeometry::with_pad([p, 0, 0]))?;
    Ok((scaled_rel_error(&fast, &slow)?, format!("{dims:?} K={k} M={n} pad={p} F({m},{k})")))
}

fn wino2d_case<T: Scalar>(d: &mut Draw) -> Result<Case> {
    let r = d.pick(&[2, 3, 5]);
    let m = d.tile(r);
    let (ph, pw) = (d.int(0, r / 2), d.int(0, r / 2));
    let c = d.int(1, 16);
    let dims = [1, c, d.int(1, 4), d.extent(r, ph), d.extent(r, pw)];
    let x = Tensor5::<T>::random(dims, d.seed())?;
    let g = Tensor5::<T>::random([c, 1, 1, r, r], d.seed())?;
    let fast = wino_conv2d_depthwise(&x, &g, &WinogradPlan::new(m, r)?, [ph, pw])?;
    let slow = conv2d_depthwise(&x, &g, &ConvGeometry::with_pad([0, ph, pw]).groups(c))?;
    Ok((scaled_rel_error(&fast, &slow)?, format!("{dims:?} R={r} pad=[{ph},{pw}] F({m}x{m},{r}x{r})")))
}

fn wino3d_case<T: Scalar>(d: &mut Draw) -> Result<Case> {
    let k = d.pick(&[2, 3]);
    let m = d.tile(k);
    let pad = [d.int(0, k / 2), d.int(0, k / 2), d.int(0, k / 2)];
    let (c, n) = (d.int(1, 8), d.int(1, 16));
    let dims = [1, c, d.extent(k, pad[0]), d.extent(k, pad[1]), d.extent(k, pad[2])];
    let x = Tensor5::<T>::random(dims, d.seed())?;
    let g = Tensor5::<T>::random([n, c, k, k, k], d.seed())?;
    let fast = wino_conv3d(&x, &g, &WinogradPlan::new(m, k)?, pad)?;
    let slow = conv3d_direct(&x, &g, &ConvGeometry::with_pad(pad))?;
    Ok((scaled_rel_error(&fast, &slow)?, format!("{dims:?} K={k} N={n} pad={pad:?} F({m},{k})^3")))
}

/// The full `[N, C, K, R, S]` kernel an FSB factorizes.
fn collapse<T: Scalar>(w: &FsbWeights<T>) -> Result<Tensor5<T>> {
    let [k, r, s] = w.kernel_extents();
    let (c, m, n) = (w.in_channels(), w.mid_channels(), w.out_channels());
    let mut full = Tensor5::zeros([n, c, k, r, s])?;
    for o in 0..n {
        for i in 0..c {
            for kt in 0..k {
                for ky in 0..r {
                    for kx in 0..s {
                        let mut acc = T::zero();
                        for j in 0..m {
                            acc += w.stage3[[o, j, 0, 0, 0]] * w.stage2[[j, 0, 0, ky, kx]] * w.stage1[[j, i, kt, 0, 0]];
                        }
                        full[[o, i, kt, ky, kx]] = acc;
                    }
                }
            }
        }
    }
    Ok(full)
}

fn fsb_shape(d: &mut Draw, kernels: &[usize], square: bool) -> ([usize; 5], [usize; 3], [usize; 3], [usize; 3]) {
    let k = d.pick(kernels);
    let r = d.pick(kernels);
    let s = if square { r } else { d.pick(kernels) };
    let pad = [d.int(0, k / 2), d.int(0, r / 2), d.int(0, s / 2)];
    let dims = [1, d.int(1, 8), d.extent(k, pad[0]), d.extent(r, pad[1]), d.extent(s, pad[2])];
    let chans = [dims[1], d.int(1, 16), d.int(1, 16)];
    (dims, [k, r, s], pad, chans)
}

fn fsb_case<T: Scalar>(d: &mut Draw) -> Result<Case> {
    let (dims, kernel, pad, [c, m, n]) = fsb_shape(d, &[1, 2, 3], false);
    let x = Tensor5::<T>::random(dims, d.seed())?;
    let w = FsbWeights::<T>::random(c, m, n, kernel, d.seed())?;
    let geom = ConvGeometry::with_pad(pad);
    let block = fsb_forward(&x, &w, &geom)?;
    let whole = conv3d_direct(&x, &collapse(&w)?, &geom)?;
    Ok((scaled_rel_error(&block, &whole)?, format!("{dims:?} kernel={kernel:?} M={m} N={n} pad={pad:?}")))
}

fn hfa_case<T: Scalar>(d: &mut Draw) -> Result<Case> {
    let (dims, kernel @ [k, r, _], pad, [c, m, n]) = fsb_shape(d, &[2, 3, 5], true);
    let (m1, m2) = (d.tile(k), d.tile(r));
    let x = Tensor5::<T>::random(dims, d.seed())?;
    let w = FsbWeights::<T>::random(c, m, n, kernel, d.seed())?;
    let geom = ConvGeometry::with_pad(pad);
    let fast = hfa_fsb_forward(&x, &w, &HybridPlan::new(m1, k, m2, r)?, &geom)?;
    let slow = fsb_forward(&x, &w, &geom)?;
    Ok((
        scaled_rel_error(&fast, &slow)?,
        format!("{dims:?} kernel={kernel:?} M={m} N={n} pad={pad:?} F({m1},{k}) x F({m2}x{m2},{r}x{r})"),
    ))
}

/// Telescoping, constant-clip and extent checks on one random clip.
fn trg_case<T: Scalar>(d: &mut Draw) -> Result<Case> {
    let dims = [d.int(1, 2), d.int(1, 8), d.int(2, 16), d.int(1, 16), d.int(1, 16)];
    let [nb, c, t, h, w] = dims;
    let x = Tensor5::<T>::random(dims, d.seed())?;
    let y = trg_forward(&x)?;
    if y.dims() != dims {
        return Err(Error::Shape(format!("trg changed dims {dims:?} to {:?}", y.dims())));
    }
    let mut err = 0.0f64;
    let hw = h * w;
    for clip in 0..nb * c {
        let base = clip * t * hw;
        for p in 0..hw {
            let sum: f64 = (0..t - 1).map(|f| y.data()[base + f * hw + p].to_f64()).sum();
            let want = x.data()[base + (t - 1) * hw + p].to_f64() - x.data()[base + p].to_f64();
            err = err.max((sum - want).abs() / (1.0 + want.abs()));
        }
    }
    let level = T::from_f64(d.int(0, 2000) as f64 / 1000.0 - 1.0);
    let y = trg_forward(&Tensor5::new(dims, level)?)?;
    for (i, v) in y.data().iter().enumerate() {
        let want = if (i / hw) % t == t - 1 { level } else { T::zero() };
        err = err.max((v.to_f64() - want.to_f64()).abs());
    }
    Ok((err, format!("{dims:?} constant={:?}", level)))
}

fn run_typed<T: Scalar>(suite: Suite, cases: usize, seed: u64, tolerance: f64) -> Result<SuiteResult> {
    let mut draw = Draw::new(seed, suite);
    let case: fn(&mut Draw) -> Result<Case> = match suite {
        Suite::Wino1d => wino1d_case::<T>,
        Suite::Wino2d => wino2d_case::<T>,
        Suite::Wino3d => wino3d_case::<T>,
        Suite::Fsb => fsb_case::<T>,
        Suite::Hfa => hfa_case::<T>,
        Suite::Trg => trg_case::<T>,
    };
    let mut result = SuiteResult { suite, cases, max_error: 0.0, tolerance, worst: None };
    for i in 0..cases {
        let (err, what) = case(&mut draw)?;
        // NaN counts as the worst possible error.
        if err.is_nan() || err > result.max_error || result.worst.is_none() {
            result.max_error = if err.is_nan() { f64::INFINITY } else { err };
            result.worst = Some((i, what));
        }
    }
    Ok(result)
}

pub fn run_suite(suite: Suite, cases: usize, seed: u64, dtype: DType) -> Result<SuiteResult> {
    let tol = suite.tolerance(dtype);
    match dtype {
        DType::F32 => run_typed::<f32>(suite, cases, seed, tol),
        DType::F64 => run_typed::<f64>(suite, cases, seed, tol),
    }
}

pub fn render_summary(results: &[SuiteResult], seed: u64, dtype: DType) -> String {
    let dt = match dtype {
        DType::F32 => "f32",
        DType::F64 => "f64",
    };
    let mut s = format!("seed {seed}  dtype {dt}\n");
    let _ = writeln!(s, "{:<8} {:>6} {:>12} {:>10}  status", "suite", "cases", "max_error", "tolerance");
    for r in results {
        let status = if r.passed() { "pass" } else { "FAIL" };
        let _ =
            writeln!(s, "{:<8} {:>6} {:>12.3e} {:>10.0e}  {status}", r.suite.name(), r.cases, r.max_error, r.tolerance);
        if !r.passed() {
            if let Some((i, what)) = &r.worst {
                let _ = writeln!(s, "  worst case #{i}: {what}");
            }
        }
    }
    let failed = results.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        let _ = writeln!(s, "all {} suites passed", results.len());
    } else {
        let _ = writeln!(s, "{failed} of {} suites failed", results.len());
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_pass_in_both_dtypes() {
        for suite in Suite::ALL {
            for dtype in [DType::F32, DType::F64] {
                let r = run_suite(suite, 12, 3, dtype).unwrap();
                assert!(r.passed(), "{} {dtype:?}: {:?}", suite.name(), r);
            }
        }
    }

    #[test]
    fn replay_is_exact() {
        let a = run_suite(Suite::Hfa, 5, 99, DType::F32).unwrap();
        let b = run_suite(Suite::Hfa, 5, 99, DType::F32).unwrap();
        assert_eq!(a, b);
        let c = run_suite(Suite::Hfa, 5, 100, DType::F32).unwrap();
        assert_ne!(a.worst, c.worst);
    }

    #[test]
    fn collapsed_kernel_of_identity_block() {
        let mut w = FsbWeights::<f64>::random(1, 1, 1, [3, 1, 1], 0).unwrap();
        w.stage2.data_mut()[0] = 2.0;
        w.stage3.data_mut()[0] = 0.5;
        let full = collapse(&w).unwrap();
        assert_eq!(full.data(), w.stage1.data());
    }

    #[test]
    fn summary_flags_failures() {
        let ok =
            SuiteResult { suite: Suite::Trg, cases: 1, max_error: 0.0, tolerance: 1e-12, worst: Some((0, "a".into())) };
        let bad = SuiteResult { max_error: 1.0, worst: Some((0, "shape".into())), ..ok.clone() };
        let s = render_summary(&[ok, bad], 1, DType::F64);
        assert!(s.contains("FAIL") && s.contains("worst case #0: shape") && s.contains("1 of 2 suites failed"), "{s}");
    }
}
