//! Wall-clock timing of the convolution paths next to their counted
//! multiplications.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use crate::analyzer::{mult_count, Algorithm};
use crate::blocks::{fsb_forward, FsbWeights, LayerKind, LayerSpec};
use crate::direct::{conv3d_direct, conv_pointwise, ConvGeometry};
use crate::error::{Error, Result};
use crate::tensor::Tensor5;
use crate::winograd::{wino_conv1d_temporal, wino_conv2d_depthwise, wino_conv3d, HybridPlan, WinogradPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BenchOp {
    Conv3d,
    Wino3d,
    Fsb,
    Hfa,
}

impl BenchOp {
    pub fn name(self) -> &'static str {
        match self {
            BenchOp::Conv3d => "conv3d",
            BenchOp::Wino3d => "wino3d",
            BenchOp::Fsb => "fsb",
            BenchOp::Hfa => "hfa",
        }
    }
}

/// `batch,C,T,H,W` followed by optional tokens `kK` (cubic kernel, default 3),
/// `nN` (output channels, default C) and `mM` (FSB width, default C).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchShape {
    pub dims: [usize; 5],
    pub kernel: usize,
    pub out: usize,
    pub mid: usize,
}

impl FromStr for BenchShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::Shape(format!("shape `{s}`: {msg}"));
        let tokens: Vec<&str> = s.split(',').map(str::trim).collect();
        if tokens.len() < 5 {
            return Err(bad("expected batch,C,T,H,W".into()));
        }
        let mut dims = [0; 5];
        for (d, t) in dims.iter_mut().zip(&tokens) {
            *d = t.parse().ok().filter(|&v| v > 0).ok_or_else(|| bad(format!("`{t}` is not a positive extent")))?;
        }
        let (mut kernel, mut out, mut mid) = (3, dims[1], dims[1]);
        for t in &tokens[5..] {
            let (tag, val) = t.split_at(t.len().min(1));
            let v: usize = val.parse().ok().filter(|&v| v > 0).ok_or_else(|| bad(format!("bad token `{t}`")))?;
            match tag {
                "k" => kernel = v,
                "n" => out = v,
                "m" => mid = v,
                _ => return Err(bad(format!("unknown token `{t}` (expected kN, nN or mN)"))),
            }
        }
        Ok(Self { dims, kernel, out, mid })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub label: String,
    pub median_ms: f64,
    pub mults: Option<u64>,
}

pub fn median(samples: &mut [f64]) -> f64 {
    samples.sort_by(f64::total_cmp);
    let n = samples.len();
    if n % 2 == 1 {
        samples[n / 2]
    } else {
        (samples[n / 2 - 1] + samples[n / 2]) / 2.0
    }
}

fn time<R>(repeat: usize, mut f: impl FnMut() -> Result<R>) -> Result<(f64, R)> {
    let mut samples = Vec::with_capacity(repeat);
    let mut last = None;
    for _ in 0..repeat {
        let start = Instant::now();
        last = Some(f()?);
        samples.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((median(&mut samples), last.expect("repeat >= 1")))
}

/// Time `op` on `shape`, `repeat` times, in f32 with "same" padding.
pub fn run_bench(op: BenchOp, shape: &BenchShape, repeat: usize) -> Result<Vec<BenchRow>> {
    if repeat == 0 {
        return Err(Error::Shape("repeat must be at least 1".into()));
    }
    let [nb, c, t, h, w] = shape.dims;
    let k = shape.kernel;
    let pad = [k / 2; 3];
    let x = Tensor5::<f32>::random(shape.dims, 1)?;
    let kind = match op {
        BenchOp::Conv3d | BenchOp::Wino3d => LayerKind::Conv3d { kernel: [k; 3], geom: ConvGeometry::with_pad(pad) },
        BenchOp::Fsb | BenchOp::Hfa => LayerKind::Fsb { kernel: [k; 3], pad, mid: shape.mid },
    };
    let layer = LayerSpec { name: op.name().into(), in_channels: c, out_channels: shape.out, kind };
    let count = |algo| mult_count(&layer, [c, t, h, w], algo).map(|v| v * nb as u64);
    let label = format!("{} {}x{}x{}x{}x{} k{k} n{}", op.name(), nb, c, t, h, w, shape.out);

    let rows = match op {
        BenchOp::Conv3d => {
            let g = Tensor5::<f32>::random([shape.out, c, k, k, k], 2)?;
            let (ms, _) = time(repeat, || conv3d_direct(&x, &g, &ConvGeometry::with_pad(pad)))?;
            vec![BenchRow { label, median_ms: ms, mults: Some(count(Algorithm::Direct)?) }]
        }
        BenchOp::Wino3d => {
            let g = Tensor5::<f32>::random([shape.out, c, k, k, k], 2)?;
            let plan = WinogradPlan::new(2, k)?;
            let (ms, _) = time(repeat, || wino_conv3d(&x, &g, &plan, pad))?;
            vec![BenchRow { label, median_ms: ms, mults: Some(count(Algorithm::Wino3d { m: 2 })?) }]
        }
        BenchOp::Fsb => {
            let wts = FsbWeights::<f32>::random(c, shape.mid, shape.out, [k; 3], 2)?;
            let (ms, _) = time(repeat, || fsb_forward(&x, &wts, &ConvGeometry::with_pad(pad)))?;
            vec![BenchRow { label, median_ms: ms, mults: Some(count(Algorithm::FsbDirect)?) }]
        }
        BenchOp::Hfa => {
            let wts = FsbWeights::<f32>::random(c, shape.mid, shape.out, [k; 3], 2)?;
            let plan = HybridPlan::new(2, k, 2, k)?;
            let (t1, mid) = time(repeat, || wino_conv1d_temporal(&x, &wts.stage1, &plan.temporal, pad[0]))?;
            let (t2, mid) = time(repeat, || wino_conv2d_depthwise(&mid, &wts.stage2, &plan.spatial, [pad[1], pad[2]]))?;
            let (t3, _) = time(repeat, || conv_pointwise(&mid, &wts.stage3))?;
            vec![
                BenchRow { label: "  stage1 temporal".into(), median_ms: t1, mults: None },
                BenchRow { label: "  stage2 depthwise".into(), median_ms: t2, mults: None },
                BenchRow { label: "  stage3 pointwise".into(), median_ms: t3, mults: None },
                BenchRow { label, median_ms: t1 + t2 + t3, mults: Some(count(Algorithm::FsbHfa { m1: 2, m2: 2 })?) },
            ]
        }
    };
    Ok(rows)
}

pub fn render_bench(rows: &[BenchRow], repeat: usize) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(2);
    let mut s = format!("{:<width$}  {:>11}  {:>14}  repeat {repeat}\n", "op", "median_ms", "mults");
    for r in rows {
        let mults = r.mults.map_or_else(String::new, |m| m.to_string());
        let line = format!("{:<width$}  {:>11.3}  {:>14}", r.label, r.median_ms, mults);
        let _ = writeln!(s, "{}", line.trim_end());
    }
    s
}
