//! Declarative layer stacks.
//!
//! Configs are JSON objects:
//!
//! ```json
//! {
//!   "name": "tiny",
//!   "input": [3, 16, 32, 32],
//!   "layers": [
//!     {"kind": "trg"},
//!     {"kind": "fsb", "name": "conv1", "in": 3, "out": 8, "k": [3, 3, 3], "m": 8},
//!     {"kind": "pool", "pool": [[1, 2, 2], [1, 2, 2]]},
//!     {"kind": "conv3d", "in": 8, "out": 16, "k": [3, 3, 3], "pad": "same"}
//!   ]
//! }
//! ```
//!
//! Layer keys: `kind` (`conv3d`, `fsb`, `trg`, `pool`, `relu`), `name`, `in`,
//! `out`, `k`, `pad` (`"same"`, an integer or a triple), `stride`, `groups`,
//! `m` (FSB intermediate width), `alpha` (`m = round(alpha * in)` when `m` is
//! absent), and `pool` (`[window, stride]`, each an integer or a triple).
//! A top-level `reference` object of strings is carried through to reports.
//! Unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::fsb::{fsb_forward, FsbWeights};
use super::trg::trg_forward;
use crate::direct::{conv3d_direct, ConvGeometry};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor5;
use crate::winograd::{hfa_fsb_forward, wino_conv3d, HybridPlan, WinogradPlan};

/// `(C, T, H, W)` of one clip.
pub type ClipShape = [usize; 4];

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv3d { kernel: [usize; 3], geom: ConvGeometry },
    Fsb { kernel: [usize; 3], pad: [usize; 3], mid: usize },
    Trg,
    Pool { window: [usize; 3], stride: [usize; 3] },
    Relu,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    pub in_channels: usize,
    pub out_channels: usize,
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self.kind {
            LayerKind::Conv3d { .. } => "conv3d",
            LayerKind::Fsb { .. } => "fsb",
            LayerKind::Trg => "trg",
            LayerKind::Pool { .. } => "pool",
            LayerKind::Relu => "relu",
        }
    }

    /// Output clip shape for an input clip shape.
    pub fn output_shape(&self, input: ClipShape) -> Result<ClipShape> {
        let [c, t, h, w] = input;
        if c != self.in_channels {
            return Err(Error::Shape(format!("`{}` expects {} channels, got {c}", self.name, self.in_channels)));
        }
        let ext = [t, h, w];
        let [t, h, w] = match &self.kind {
            LayerKind::Conv3d { kernel, geom } => geom.output_extents(ext, *kernel)?,
            LayerKind::Fsb { kernel, pad, .. } => ConvGeometry::with_pad(*pad).output_extents(ext, *kernel)?,
            LayerKind::Trg => {
                if t < 2 {
                    return Err(Error::Shape(format!("`{}` needs at least 2 frames, got {t}", self.name)));
                }
                ext
            }
            LayerKind::Pool { window, stride } => {
                ConvGeometry { stride: *stride, ..Default::default() }.output_extents(ext, *window)?
            }
            LayerKind::Relu => ext,
        };
        Ok([self.out_channels, t, h, w])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub input: ClipShape,
    pub layers: Vec<LayerSpec>,
    pub reference: BTreeMap<String, String>,
}

impl ModelSpec {
    /// `(input, output)` clip shape of every layer.
    pub fn shapes(&self) -> Result<Vec<(ClipShape, ClipShape)>> {
        let mut cur = self.input;
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer.output_shape(cur).map_err(|e| e.at_layer(i))?;
            out.push((cur, next));
            cur = next;
        }
        Ok(out)
    }

    pub fn output_shape(&self) -> Result<ClipShape> {
        Ok(self.shapes()?.last().map_or(self.input, |s| s.1))
    }

    /// Same layers on a different clip shape; shapes are re-validated.
    pub fn with_input(&self, input: ClipShape) -> Result<Self> {
        let spec = Self { input, ..self.clone() };
        spec.shapes()?;
        Ok(spec)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    name: String,
    input: ClipShape,
    layers: Vec<RawLayer>,
    #[serde(default)]
    reference: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Triple {
    One(usize),
    Three([usize; 3]),
}

impl Triple {
    fn get(&self) -> [usize; 3] {
        match *self {
            Triple::One(v) => [v; 3],
            Triple::Three(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Pad {
    Named(String),
    Explicit(Triple),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLayer {
    kind: String,
    name: Option<String>,
    #[serde(rename = "in")]
    in_channels: Option<usize>,
    #[serde(rename = "out")]
    out_channels: Option<usize>,
    k: Option<[usize; 3]>,
    pad: Option<Pad>,
    stride: Option<Triple>,
    groups: Option<usize>,
    m: Option<usize>,
    alpha: Option<f64>,
    pool: Option<[Triple; 2]>,
}

fn cfg_err(layer: usize, field: &str, msg: impl Into<String>) -> Error {
    Error::Config { layer: Some(layer), field: Some(field.into()), msg: msg.into() }
}

impl RawLayer {
    fn build(self, index: usize, channels: usize) -> Result<LayerSpec> {
        let err = |field: &str, msg: String| cfg_err(index, field, msg);
        let kind_name = self.kind.as_str();
        let name = self.name.clone().unwrap_or_else(|| format!("{kind_name}{index}"));
        let in_channels = self.in_channels.unwrap_or(channels);
        if in_channels != channels {
            return Err(err("in", format!("declares {in_channels} input channels, previous layer gives {channels}")));
        }
        let conv_like = matches!(kind_name, "conv3d" | "fsb");
        let check_absent = |present: bool, field: &str| {
            if present {
                Err(err(field, format!("not valid for `{kind_name}` layers")))
            } else {
                Ok(())
            }
        };
        if !conv_like {
            check_absent(self.k.is_some(), "k")?;
            check_absent(self.pad.is_some(), "pad")?;
            check_absent(self.out_channels.is_some_and(|o| o != channels), "out")?;
            check_absent(self.groups.is_some(), "groups")?;
        }
        if kind_name != "fsb" {
            check_absent(self.m.is_some(), "m")?;
            check_absent(self.alpha.is_some(), "alpha")?;
        }
        if kind_name != "pool" {
            check_absent(self.pool.is_some(), "pool")?;
        }
        if !matches!(kind_name, "conv3d" | "fsb") {
            check_absent(self.stride.is_some(), "stride")?;
        }

        let kernel = || -> Result<[usize; 3]> {
            let k = self.k.ok_or_else(|| err("k", format!("`{kind_name}` layers need kernel extents")))?;
            if k.contains(&0) {
                return Err(err("k", "kernel extents must be positive".into()));
            }
            Ok(k)
        };
        let out = || {
            self.out_channels
                .filter(|&o| o > 0)
                .ok_or_else(|| err("out", "positive output channel count required".into()))
        };
        let pad = |k: [usize; 3]| match &self.pad {
            None => Ok(k.map(|v| v / 2)),
            Some(Pad::Named(s)) if s == "same" => Ok(k.map(|v| v / 2)),
            Some(Pad::Named(s)) => Err(err("pad", format!("unknown padding `{s}`"))),
            Some(Pad::Explicit(t)) => Ok(t.get()),
        };
        let stride = || -> Result<[usize; 3]> {
            let s = self.stride.as_ref().map_or([1; 3], Triple::get);
            if s.contains(&0) {
                return Err(err("stride", "strides must be positive".into()));
            }
            Ok(s)
        };

        let (out_channels, kind) = match kind_name {
            "conv3d" => {
                let k = kernel()?;
                let geom = ConvGeometry { pad: pad(k)?, stride: stride()?, groups: self.groups.unwrap_or(1) };
                let out = out()?;
                geom.check_channels(in_channels, out).map_err(|e| err("groups", e.to_string()))?;
                (out, LayerKind::Conv3d { kernel: k, geom })
            }
            "fsb" => {
                let k = kernel()?;
                if stride()? != [1; 3] {
                    return Err(err("stride", "FSB layers are stride-1; add a pool layer".into()));
                }
                if self.groups.is_some_and(|g| g != 1) {
                    return Err(err("groups", "FSB layers fix their own grouping".into()));
                }
                let mid = match (self.m, self.alpha) {
                    (Some(_), Some(_)) => return Err(err("m", "give either `m` or `alpha`, not both".into())),
                    (Some(m), None) => m,
                    (None, alpha) => {
                        let alpha = alpha.unwrap_or(1.0);
                        if !(alpha.is_finite() && alpha > 0.0) {
                            return Err(err("alpha", format!("must be positive, got {alpha}")));
                        }
                        (alpha * in_channels as f64).round() as usize
                    }
                };
                if mid == 0 {
                    return Err(err("m", "intermediate width must be positive".into()));
                }
                (out()?, LayerKind::Fsb { kernel: k, pad: pad(k)?, mid })
            }
            "trg" => (channels, LayerKind::Trg),
            "relu" => (channels, LayerKind::Relu),
            "pool" => {
                let [window, stride] = self
                    .pool
                    .as_ref()
                    .map(|[w, s]| [w.get(), s.get()])
                    .ok_or_else(|| err("pool", "pool layers need [window, stride]".into()))?;
                if window.contains(&0) || stride.contains(&0) {
                    return Err(err("pool", "window and stride must be positive".into()));
                }
                (channels, LayerKind::Pool { window, stride })
            }
            other => return Err(err("kind", format!("unknown layer kind `{other}`"))),
        };
        Ok(LayerSpec { name, in_channels, out_channels, kind })
    }
}

/// Parse and validate a config from text.
pub fn model_from_str(text: &str) -> Result<ModelSpec> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| Error::Config {
        layer: None,
        field: None,
        msg: format!("line {}, column {}: {e}", e.line(), e.column()),
    })?;
    if raw.input.contains(&0) {
        return Err(Error::Config { layer: None, field: Some("input".into()), msg: "extents must be positive".into() });
    }
    let mut channels = raw.input[0];
    let mut layers = Vec::with_capacity(raw.layers.len());
    for (i, l) in raw.layers.into_iter().enumerate() {
        let spec = l.build(i, channels)?;
        channels = spec.out_channels;
        layers.push(spec);
    }
    let spec = ModelSpec { name: raw.name, input: raw.input, layers, reference: raw.reference };
    spec.shapes()?;
    Ok(spec)
}

pub fn model_parse(path: impl AsRef<Path>) -> Result<ModelSpec> {
    model_from_str(&std::fs::read_to_string(path)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights<T> {
    Conv(Tensor5<T>),
    Fsb(FsbWeights<T>),
    None,
}

/// Seeded weights for every layer, scaled by `1/sqrt(fan_in)` so activations
/// stay O(1) through deep stacks.
pub fn random_weights<T: Scalar>(spec: &ModelSpec, seed: u64) -> Result<Vec<LayerWeights<T>>> {
    let scale = |t: Tensor5<T>, fan_in: usize| {
        let s = T::from_f64(1.0 / (fan_in as f64).sqrt());
        t.map(|v| v * s)
    };
    spec.layers
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let seed = seed.wrapping_add(1000 * i as u64);
            Ok(match &l.kind {
                LayerKind::Conv3d { kernel: [k, r, s], geom } => {
                    let cg = l.in_channels / geom.groups;
                    let w = Tensor5::random([l.out_channels, cg, *k, *r, *s], seed)?;
                    LayerWeights::Conv(scale(w, cg * k * r * s))
                }
                LayerKind::Fsb { kernel, mid, .. } => {
                    let [k, r, s] = *kernel;
                    let w = FsbWeights::random(l.in_channels, *mid, l.out_channels, *kernel, seed)?;
                    LayerWeights::Fsb(FsbWeights::new(
                        scale(w.stage1, l.in_channels * k),
                        scale(w.stage2, r * s),
                        scale(w.stage3, *mid),
                    )?)
                }
                _ => LayerWeights::None,
            })
        })
        .collect()
}

/// How convolutional layers are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Backend {
    Direct,
    /// Winograd where the layer allows it (stride 1, plan available), direct
    /// otherwise. `m` is the 3D tile for conv3d layers.
    Fast {
        m: usize,
        m1: usize,
        m2: usize,
    },
}

pub fn max_pool3d<T: Scalar>(input: &Tensor5<T>, window: [usize; 3], stride: [usize; 3]) -> Result<Tensor5<T>> {
    let [nb, c, t, h, w] = input.dims();
    let geom = ConvGeometry { stride, ..Default::default() };
    let [to, ho, wo] = geom.output_extents([t, h, w], window)?;
    let mut out = Tensor5::zeros([nb, c, to, ho, wo])?;
    let mut o = 0;
    for b in 0..nb {
        for ch in 0..c {
            for ot in 0..to {
                for oy in 0..ho {
                    for ox in 0..wo {
                        let mut best = input[[b, ch, ot * stride[0], oy * stride[1], ox * stride[2]]];
                        for dt in 0..window[0] {
                            for dy in 0..window[1] {
                                for dx in 0..window[2] {
                                    let v =
                                        input[[b, ch, ot * stride[0] + dt, oy * stride[1] + dy, ox * stride[2] + dx]];
                                    if v > best {
                                        best = v;
                                    }
                                }
                            }
                        }
                        out.data_mut()[o] = best;
                        o += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

fn forward_layer<T: Scalar>(
    layer: &LayerSpec,
    weights: &LayerWeights<T>,
    x: &Tensor5<T>,
    backend: Backend,
) -> Result<Tensor5<T>> {
    match (&layer.kind, weights) {
        (LayerKind::Conv3d { kernel, geom }, LayerWeights::Conv(g)) => {
            if g.dims() != [layer.out_channels, layer.in_channels / geom.groups, kernel[0], kernel[1], kernel[2]] {
                return Err(Error::Shape(format!("`{}` weights have dims {:?}", layer.name, g.dims())));
            }
            let cubic = kernel[0] == kernel[1] && kernel[1] == kernel[2];
            match backend {
                Backend::Fast { m, .. } if cubic && geom.is_unit_stride() && geom.groups == 1 => {
                    match WinogradPlan::new(m, kernel[0]) {
                        Ok(plan) => wino_conv3d(x, g, &plan, geom.pad),
                        Err(_) => conv3d_direct(x, g, geom),
                    }
                }
                _ => conv3d_direct(x, g, geom),
            }
        }
        (LayerKind::Fsb { kernel, pad, mid }, LayerWeights::Fsb(w)) => {
            if w.in_channels() != layer.in_channels
                || w.mid_channels() != *mid
                || w.out_channels() != layer.out_channels
                || w.kernel_extents() != *kernel
            {
                return Err(Error::Shape(format!("`{}` FSB weights do not match the layer", layer.name)));
            }
            let geom = ConvGeometry::with_pad(*pad);
            match backend {
                Backend::Fast { m1, m2, .. } if kernel[1] == kernel[2] => {
                    match HybridPlan::new(m1, kernel[0], m2, kernel[1]) {
                        Ok(plan) => hfa_fsb_forward(x, w, &plan, &geom),
                        Err(_) => fsb_forward(x, w, &geom),
                    }
                }
                _ => fsb_forward(x, w, &geom),
            }
        }
        (LayerKind::Trg, LayerWeights::None) => trg_forward(x),
        (LayerKind::Relu, LayerWeights::None) => {
            let zero = T::zero();
            Ok(x.map(|v| if v > zero { v } else { zero }))
        }
        (LayerKind::Pool { window, stride }, LayerWeights::None) => max_pool3d(x, *window, *stride),
        _ => Err(Error::Shape(format!("weights of the wrong kind for `{}`", layer.name))),
    }
}

/// Run every layer in order. Errors name the first failing layer.
pub fn model_forward<T: Scalar>(
    spec: &ModelSpec,
    weights: &[LayerWeights<T>],
    input: &Tensor5<T>,
    backend: Backend,
) -> Result<Tensor5<T>> {
    let [_, c, t, h, w] = input.dims();
    if [c, t, h, w] != spec.input {
        return Err(Error::Shape(format!("input clip {:?} does not match declared {:?}", [c, t, h, w], spec.input)));
    }
    if weights.len() != spec.layers.len() {
        return Err(Error::Shape(format!("{} weight sets for {} layers", weights.len(), spec.layers.len())));
    }
    let mut x = input.clone();
    for (i, (layer, w)) in spec.layers.iter().zip(weights).enumerate() {
        x = forward_layer(layer, w, &x, backend).map_err(|e| e.at_layer(i))?;
    }
    Ok(x)
}
