//! Parameter and multiplication accounting.
//!
//! Counts are exact integers over the tile grids the kernels actually run:
//! every Winograd axis is ceil-divided into tiles of `m` outputs, so ragged
//! edges are charged a full tile. Only multiplications are counted.
//!
//! For an FSB layer the `direct` and `wino3d` columns describe the plain
//! `K x R x S` convolution it replaces, which lets one report compare both
//! designs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::blocks::{ClipShape, LayerKind, LayerSpec, ModelSpec};
use crate::direct::ConvGeometry;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Direct,
    Wino3d { m: usize },
    FsbDirect,
    FsbHfa { m1: usize, m2: usize },
}

/// Report columns, in CSV order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    Direct,
    Wino3d,
    Fsb,
    Hfa,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Direct, Variant::Wino3d, Variant::Fsb, Variant::Hfa];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Direct => "direct",
            Variant::Wino3d => "wino3d",
            Variant::Fsb => "fsb",
            Variant::Hfa => "hfa",
        }
    }

    fn algorithm(self, plans: Plans) -> Algorithm {
        match self {
            Variant::Direct => Algorithm::Direct,
            Variant::Wino3d => Algorithm::Wino3d { m: plans.m },
            Variant::Fsb => Algorithm::FsbDirect,
            Variant::Hfa => Algorithm::FsbHfa { m1: plans.m1, m2: plans.m2 },
        }
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Unsupported(format!("unknown variant `{s}` (expected direct, wino3d, fsb or hfa)")))
    }
}

/// Output tile extents: `m` for the 3D path, `m1` temporal and `m2` spatial
/// for the hybrid path.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plans {
    pub m: usize,
    pub m1: usize,
    pub m2: usize,
}

impl Default for Plans {
    fn default() -> Self {
        Self { m: 2, m1: 2, m2: 2 }
    }
}

fn u(v: usize) -> u64 {
    v as u64
}

fn tiles(extent: usize, m: usize) -> u64 {
    u(extent.div_ceil(m))
}

/// Stored weights of the layer as configured.
pub fn param_count(layer: &LayerSpec) -> u64 {
    let (c, n) = (u(layer.in_channels), u(layer.out_channels));
    match &layer.kind {
        LayerKind::Conv3d { kernel: [k, r, s], geom } => n * c / u(geom.groups) * u(k * r * s),
        LayerKind::Fsb { kernel: [k, r, s], mid, .. } => {
            let m = u(*mid);
            m * c * u(*k) + m * u(r * s) + n * m
        }
        _ => 0,
    }
}

/// Weights of the ungrouped `K x R x S` convolution the layer stands for.
pub fn baseline_param_count(layer: &LayerSpec) -> u64 {
    match &layer.kind {
        LayerKind::Fsb { kernel: [k, r, s], .. } => u(layer.in_channels) * u(layer.out_channels) * u(k * r * s),
        _ => param_count(layer),
    }
}

fn voxels(shape: [usize; 3]) -> u64 {
    shape.iter().map(|&v| u(v)).product()
}

fn conv_mults(
    c: usize,
    n: usize,
    kernel: [usize; 3],
    geom: &ConvGeometry,
    ext: [usize; 3],
    algo: Algorithm,
) -> Result<u64> {
    let out = geom.output_extents(ext, kernel)?;
    let direct = u(n) * u(c / geom.groups) * voxels(kernel) * voxels(out);
    match algo {
        Algorithm::Direct => Ok(direct),
        Algorithm::Wino3d { m } => {
            let cubic = kernel[0] == kernel[1] && kernel[1] == kernel[2];
            if !cubic {
                return Err(Error::Unsupported(format!("3D Winograd needs cubic kernels, got {kernel:?}")));
            }
            // Strided or grouped layers run on the direct path.
            if !geom.is_unit_stride() || geom.groups != 1 {
                return Ok(direct);
            }
            let n_t = u(m + kernel[0] - 1);
            let grid: u64 = out.iter().map(|&o| tiles(o, m)).product();
            Ok(u(n) * u(c) * grid * n_t * n_t * n_t)
        }
        _ => Err(Error::Unsupported("FSB algorithms apply to FSB layers only".into())),
    }
}

/// Multiplications for one batch item of `layer` on `input`.
pub fn mult_count(layer: &LayerSpec, input: ClipShape, algo: Algorithm) -> Result<u64> {
    let [c, t, h, w] = input;
    let n = layer.out_channels;
    match &layer.kind {
        LayerKind::Trg | LayerKind::Pool { .. } | LayerKind::Relu => Ok(0),
        LayerKind::Conv3d { kernel, geom } => conv_mults(c, n, *kernel, geom, [t, h, w], algo),
        LayerKind::Fsb { kernel, pad, mid } => {
            let [k, r, s] = *kernel;
            let m = *mid;
            let [pt, ph, pw] = *pad;
            let t1 = ConvGeometry::with_pad([pt, 0, 0]).output_extents([t, h, w], [k, 1, 1])?[0];
            let [_, h2, w2] = ConvGeometry::with_pad([0, ph, pw]).output_extents([t1, h, w], [1, r, s])?;
            let pointwise = u(n) * u(m) * u(t1) * u(h2) * u(w2);
            match algo {
                Algorithm::Direct | Algorithm::Wino3d { .. } => {
                    conv_mults(c, n, *kernel, &ConvGeometry::with_pad(*pad), [t, h, w], algo)
                }
                Algorithm::FsbDirect => {
                    Ok(u(m) * u(c) * u(k) * u(t1) * u(h * w) + u(m) * u(r * s) * u(t1) * u(h2) * u(w2) + pointwise)
                }
                Algorithm::FsbHfa { m1, m2 } => {
                    if r != s {
                        return Err(Error::Unsupported(format!("2D Winograd needs square kernels, got {r}x{s}")));
                    }
                    let stage1 = u(m) * u(c) * tiles(t1, m1) * u(m1 + k - 1) * u(h * w);
                    let n2 = u(m2 + r - 1);
                    let stage2 = u(m) * u(t1) * tiles(h2, m2) * tiles(w2, m2) * n2 * n2;
                    Ok(stage1 + stage2 + pointwise)
                }
            }
        }
    }
}

/// The same count without tile rounding: `(m + r - 1) / m` per output and axis.
pub fn asymptotic_mults(layer: &LayerSpec, input: ClipShape, algo: Algorithm) -> Result<f64> {
    let [c, t, h, w] = input;
    let n = layer.out_channels as f64;
    let per = |m: usize, r: usize| (m + r - 1) as f64 / m as f64;
    match (&layer.kind, algo) {
        (LayerKind::Conv3d { kernel, geom }, Algorithm::Wino3d { m })
            if geom.is_unit_stride() && geom.groups == 1 && kernel[0] == kernel[1] && kernel[1] == kernel[2] =>
        {
            let out = geom.output_extents([t, h, w], *kernel)?;
            Ok(n * c as f64 * voxels(out) as f64 * per(m, kernel[0]).powi(3))
        }
        (LayerKind::Fsb { kernel, pad, .. }, Algorithm::Wino3d { m })
            if kernel[0] == kernel[1] && kernel[1] == kernel[2] =>
        {
            let out = ConvGeometry::with_pad(*pad).output_extents([t, h, w], *kernel)?;
            Ok(n * c as f64 * voxels(out) as f64 * per(m, kernel[0]).powi(3))
        }
        (LayerKind::Fsb { kernel: [k, r, s], pad, mid }, Algorithm::FsbHfa { m1, m2 }) if r == s => {
            let m = *mid as f64;
            let t1 = ConvGeometry::with_pad([pad[0], 0, 0]).output_extents([t, h, w], [*k, 1, 1])?[0];
            let [_, h2, w2] = ConvGeometry::with_pad([0, pad[1], pad[2]]).output_extents([t1, h, w], [1, *r, *s])?;
            let plane = (t1 * h2 * w2) as f64;
            Ok(m * c as f64 * (t1 * h * w) as f64 * per(m1, *k) + m * plane * per(m2, *r).powi(2) + n * m * plane)
        }
        _ => mult_count(layer, input, algo).map(|v| v as f64),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub name: String,
    pub kind: &'static str,
    pub in_shape: ClipShape,
    pub out_shape: ClipShape,
    pub params_base: u64,
    pub params_actual: u64,
    /// Per [`Variant::ALL`] entry; `None` when not requested or not applicable.
    pub mults: [Option<u64>; 4],
}

impl ReportRow {
    /// `params_base / params_actual` to one decimal, for layers with weights.
    pub fn rate(&self) -> Option<String> {
        (self.params_actual > 0).then(|| format!("{:.1}", self.params_base as f64 / self.params_actual as f64))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityReport {
    pub model: String,
    pub input: ClipShape,
    pub plans: Plans,
    pub variants: Vec<Variant>,
    pub rows: Vec<ReportRow>,
    pub total_params_base: u64,
    pub total_params_actual: u64,
    /// Column sums; `None` if any row lacks the column.
    pub total_mults: [Option<u64>; 4],
    pub asymptotic_mults: [Option<f64>; 4],
    pub reference: BTreeMap<String, String>,
}

impl ComplexityReport {
    pub fn total(&self, v: Variant) -> Option<u64> {
        self.total_mults[v as usize]
    }

    pub fn overall_rate(&self) -> f64 {
        self.total_params_base as f64 / self.total_params_actual as f64
    }
}

/// Per-layer parameter and multiplication counts for the requested variants.
pub fn analyze_model(spec: &ModelSpec, variants: &[Variant], plans: Plans) -> Result<ComplexityReport> {
    let shapes = spec.shapes()?;
    let mut rows = Vec::with_capacity(spec.layers.len());
    let mut asym = [None; 4];
    for v in variants {
        asym[*v as usize] = Some(0.0);
    }
    for (i, (layer, &(in_shape, out_shape))) in spec.layers.iter().zip(&shapes).enumerate() {
        let mut mults = [None; 4];
        for &v in variants {
            let algo = v.algorithm(plans);
            match mult_count(layer, in_shape, algo) {
                Ok(n) => {
                    mults[v as usize] = Some(n);
                    if let Some(a) = asym[v as usize].as_mut() {
                        *a += asymptotic_mults(layer, in_shape, algo).map_err(|e| e.at_layer(i))?;
                    }
                }
                Err(Error::Unsupported(_)) => asym[v as usize] = None,
                Err(e) => return Err(e.at_layer(i)),
            }
        }
        rows.push(ReportRow {
            name: layer.name.clone(),
            kind: layer.kind_name(),
            in_shape,
            out_shape,
            params_base: baseline_param_count(layer),
            params_actual: param_count(layer),
            mults,
        });
    }
    let mut total_mults = [None; 4];
    for &v in variants {
        total_mults[v as usize] = rows.iter().map(|r| r.mults[v as usize]).sum();
    }
    Ok(ComplexityReport {
        model: spec.name.clone(),
        input: spec.input,
        plans,
        variants: variants.to_vec(),
        total_params_base: rows.iter().map(|r| r.params_base).sum(),
        total_params_actual: rows.iter().map(|r| r.params_actual).sum(),
        rows,
        total_mults,
        asymptotic_mults: asym,
        reference: spec.reference.clone(),
    })
}

pub const CSV_HEADER: &str =
    "layer,kind,in_shape,out_shape,params_base,params_fsb,rate,mults_direct,mults_wino3d,mults_fsb,mults_hfa";

fn shape_str(s: ClipShape) -> String {
    s.map(|v| v.to_string()).join("x")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// Short magnitude such as `27.7M` or `154.0G`.
pub fn human(v: f64) -> String {
    match v {
        v if v >= 1e9 => format!("{:.1}G", v / 1e9),
        v if v >= 1e6 => format!("{:.1}M", v / 1e6),
        v if v >= 1e3 => format!("{:.1}K", v / 1e3),
        v => format!("{v}"),
    }
}

pub fn render_csv(report: &ComplexityReport) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    let mut line =
        |name: &str, kind: &str, inp: String, out: String, base: u64, act: u64, rate: String, m: &[Option<u64>; 4]| {
            let cols = m.iter().map(|v| opt(*v)).collect::<Vec<_>>().join(",");
            let _ = writeln!(s, "{name},{kind},{inp},{out},{base},{act},{rate},{cols}");
        };
    for r in &report.rows {
        line(
            &r.name,
            r.kind,
            shape_str(r.in_shape),
            shape_str(r.out_shape),
            r.params_base,
            r.params_actual,
            opt(r.rate()),
            &r.mults,
        );
    }
    line(
        "total",
        "",
        shape_str(report.input),
        report.rows.last().map_or_else(|| shape_str(report.input), |r| shape_str(r.out_shape)),
        report.total_params_base,
        report.total_params_actual,
        format!("{:.1}", report.overall_rate()),
        &report.total_mults,
    );
    s
}

pub fn render_text(report: &ComplexityReport) -> String {
    let mut header = vec!["layer", "kind", "in_shape", "out_shape", "params_base", "params", "rate"];
    header.extend(report.variants.iter().map(|v| v.name()));
    let mut table: Vec<Vec<String>> = vec![header.into_iter().map(String::from).collect()];
    let cells = |m: &[Option<u64>; 4]| -> Vec<String> {
        report.variants.iter().map(|&v| m[v as usize].map_or("-".into(), |n| n.to_string())).collect()
    };
    for r in &report.rows {
        let mut row = vec![
            r.name.clone(),
            r.kind.to_string(),
            shape_str(r.in_shape),
            shape_str(r.out_shape),
            r.params_base.to_string(),
            r.params_actual.to_string(),
            r.rate().map_or("-".into(), |v| format!("{v}x")),
        ];
        row.extend(cells(&r.mults));
        table.push(row);
    }
    let mut total = vec![
        "total".to_string(),
        String::new(),
        shape_str(report.input),
        report.rows.last().map_or_else(|| shape_str(report.input), |r| shape_str(r.out_shape)),
        report.total_params_base.to_string(),
        report.total_params_actual.to_string(),
        format!("{:.1}x", report.overall_rate()),
    ];
    total.extend(cells(&report.total_mults));
    table.push(total);

    let widths: Vec<usize> = (0..table[0].len()).map(|c| table.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    let Plans { m, m1, m2 } = report.plans;
    let mut s = format!(
        "model {}  input {}  plans wino3d F({m},3)  hfa F({m1},K) x F({m2}x{m2},RxR)\n\n",
        report.model,
        shape_str(report.input)
    );
    for (i, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(c, (v, w))| if c < 2 { format!("{v:<w$}") } else { format!("{v:>w$}") })
            .collect();
        let _ = writeln!(s, "{}", line.join("  ").trim_end());
        if i == 0 || i + 2 == table.len() {
            let _ = writeln!(s, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
        }
    }
    let _ = writeln!(
        s,
        "\nparams {} -> {} ({:.2}x)",
        human(report.total_params_base as f64),
        human(report.total_params_actual as f64),
        report.overall_rate()
    );
    for &v in &report.variants {
        let i = v as usize;
        let exact = report.total_mults[i].map_or("n/a".into(), |n| human(n as f64));
        let asym = report.asymptotic_mults[i].map_or("n/a".into(), human);
        let _ = writeln!(s, "mults {:<6} {exact:>8} tiled  {asym:>8} asymptotic", v.name());
    }
    if !report.reference.is_empty() {
        let _ = writeln!(s, "\nreference figures (not derived from this config):");
        for (k, v) in &report.reference {
            let _ = writeln!(s, "  {k}: {v}");
        }
    }
    s
}
