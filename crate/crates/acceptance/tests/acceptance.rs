//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use lightconv3d::analyzer::{
    analyze_model, baseline_param_count, human, mult_count, param_count, render_text, Algorithm, Plans, Variant,
};
use lightconv3d::blocks::{model_parse, trg_forward, LayerKind, LayerSpec};
use lightconv3d::direct::{conv1d_temporal, conv2d_depthwise, conv3d_direct, ConvGeometry};
use lightconv3d::scalar::{count_ops, Counted};
use lightconv3d::tensor::{read_t5df_from, write_t5df_to, DType, DynTensor, Tensor5};
use lightconv3d::verify::{run_suite, Suite};
use lightconv3d::winograd::{wino1d_tile, wino2d_tile, wino3d_tile, Rational, WinogradPlan};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for dtype in [DType::F64, DType::F32] {
        let tol = if dtype == DType::F64 { 1e-9 } else { 1e-3 };
        for suite in [Suite::Wino1d, Suite::Wino2d, Suite::Wino3d, Suite::Hfa] {
            let r = run_suite(suite, 100, 2024, dtype).map_err(|e| e.to_string())?;
            ok &= r.cases == 100 && r.max_error <= tol;
            parts.push(format!("{}/{:?} {:.1e}", suite.name(), dtype, r.max_error));
        }
    }
    let elapsed = start.elapsed();
    ok &= elapsed < Duration::from_secs(60);
    check(ok, format!("{} in {:.2}s", parts.join(", "), elapsed.as_secs_f64()))
}

fn counted(v: &[f64]) -> Vec<Counted> {
    v.iter().map(|&x| Counted(x)).collect()
}

fn tile_counts() -> Outcome {
    let plan = WinogradPlan::new(2, 3).map_err(|e| e.to_string())?;
    let ramp = |n: usize| counted(&(0..n).map(|i| i as f64 * 0.25 - 1.0).collect::<Vec<_>>());
    let (_, w1) = count_ops(|| wino1d_tile(&plan, &ramp(3), &ramp(4)).unwrap());
    let (_, w2) = count_ops(|| wino2d_tile(&plan, &ramp(9), &ramp(16)).unwrap());
    let (_, w3) = count_ops(|| wino3d_tile(&plan, &ramp(27), &ramp(64)).unwrap());

    let t = |dims| Tensor5::<Counted>::random(dims, 1).unwrap();
    let none = ConvGeometry::default();
    let (_, d1) = count_ops(|| conv1d_temporal(&t([1, 1, 4, 1, 1]), &t([1, 1, 3, 1, 1]), &none).unwrap());
    let (_, d2) = count_ops(|| conv2d_depthwise(&t([1, 1, 1, 4, 4]), &t([1, 1, 1, 3, 3]), &none).unwrap());
    let (_, d3) = count_ops(|| conv3d_direct(&t([1, 1, 4, 4, 4]), &t([1, 1, 3, 3, 3]), &none).unwrap());

    let wino = [w1.mults, w2.mults, w3.mults];
    let direct = [d1.mults, d2.mults, d3.mults];
    check(wino == [4, 16, 64] && direct == [6, 36, 216], format!("F(2,3) {wino:?} vs direct {direct:?}"))
}

fn layer_compression_table() -> Outcome {
    let start = Instant::now();
    let spec = model_parse(config("fsb_c3d.cfg")).map_err(|e| e.to_string())?;
    let report = analyze_model(&spec, &Variant::ALL, Plans::default()).map_err(|e| e.to_string())?;
    let text = render_text(&report);
    let elapsed = start.elapsed();

    let published = [1.0, 10.5, 10.7, 13.3, 10.7, 6.7];
    let stages = ["conv1", "conv2", "conv3", "conv4", "conv5", "conv6a"];
    let mut rates = Vec::new();
    for name in stages {
        let row = report.rows.iter().find(|r| r.name == name).ok_or(format!("no layer {name}"))?;
        rates.push(row.rate().ok_or(format!("{name} has no rate"))?.parse::<f64>().unwrap());
    }
    let close = rates.iter().zip(published).all(|(a, b)| (a - b).abs() <= 0.1 + 1e-9);
    let totals = (report.total_params_base, report.total_params_actual);
    let printed = (human(totals.0 as f64), human(totals.1 as f64), format!("{:.1}x", report.overall_rate()));
    let ok = close
        && totals == (27_653_184, 3_731_136)
        && printed == ("27.7M".into(), "3.7M".into(), "7.4x".into())
        && text.contains("27.7M -> 3.7M")
        && elapsed < Duration::from_secs(1);
    check(
        ok,
        format!(
            "rates {rates:?}, params {} -> {} ({} -> {}, {}) in {:.3}s",
            totals.0,
            totals.1,
            printed.0,
            printed.1,
            printed.2,
            elapsed.as_secs_f64()
        ),
    )
}

fn typical_compression() -> Outcome {
    let layer = LayerSpec {
        name: "block".into(),
        in_channels: 64,
        out_channels: 64,
        kind: LayerKind::Fsb { kernel: [3; 3], pad: [1; 3], mid: 64 },
    };
    let (base, fsb) = (baseline_param_count(&layer), param_count(&layer));
    let ratio = format!("{:.1}", base as f64 / fsb as f64);
    check(base == 110_592 && fsb == 16_960 && ratio == "6.5", format!("{base} / {fsb} = {ratio}x"))
}

fn hybrid_reduction() -> Outcome {
    let plans = Plans { m: 2, m1: 2, m2: 2 };
    let fsb = model_parse(config("fsb_c3d.cfg")).map_err(|e| e.to_string())?;
    let c3d = model_parse(config("c3d.cfg")).map_err(|e| e.to_string())?;
    let fsb = analyze_model(&fsb, &[Variant::Fsb, Variant::Hfa], plans).map_err(|e| e.to_string())?;
    let c3d = analyze_model(&c3d, &[Variant::Direct], plans).map_err(|e| e.to_string())?;
    let (direct, plain, fast) =
        (c3d.total(Variant::Direct).unwrap(), fsb.total(Variant::Fsb).unwrap(), fsb.total(Variant::Hfa).unwrap());
    let ratio = plain as f64 / fast as f64;
    let monotone = direct > plain && plain > fast;
    let reference: Vec<String> =
        ["mults_fsb", "mults_hfa"].iter().filter_map(|k| fsb.reference.get(*k).map(|v| format!("{k} {v}"))).collect();
    check(
        (1.4..=1.6).contains(&ratio) && monotone,
        format!(
            "fsb/hfa = {ratio:.4} (bracket [1.4, 1.6]), direct {} > fsb {} > hfa {}: {monotone}; published {}",
            human(direct as f64),
            human(plain as f64),
            human(fast as f64),
            reference.join(", ")
        ),
    )
}

fn trg_properties() -> Outcome {
    let mut worst = 0.0f64;
    let mut ok = true;
    for seed in 0..100u64 {
        let t = 2 + (seed % 15) as usize;
        let dims =
            [1 + (seed % 2) as usize, 1 + (seed % 5) as usize, t, 1 + (seed % 7) as usize, 2 + (seed % 6) as usize];
        let x = Tensor5::<f64>::random(dims, seed).map_err(|e| e.to_string())?;
        let y = trg_forward(&x).map_err(|e| e.to_string())?;
        ok &= y.dims() == dims;
        let [nb, c, _, h, w] = dims;
        for (b, ch, py, px) in (0..nb * c * h * w).map(|i| (i / (c * h * w), i / (h * w) % c, i / w % h, i % w)) {
            let sum: f64 = (0..t - 1).map(|f| y[[b, ch, f, py, px]]).sum();
            let want = x[[b, ch, t - 1, py, px]] - x[[b, ch, 0, py, px]];
            worst = worst.max((sum - want).abs() / want.abs().max(1.0));
        }
        let level = seed as f64 * 0.37 - 11.0;
        let y = trg_forward(&Tensor5::new(dims, level).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        for i in 0..y.len() {
            let frame = y.index_of(i)[2];
            ok &= y.data()[i] == if frame == t - 1 { level } else { 0.0 };
        }
    }
    let x = Tensor5::<Counted>::random([1, 3, 8, 5, 5], 9).unwrap();
    let (_, ops) = count_ops(|| trg_forward(&x).unwrap());
    let layer = LayerSpec { name: "trg".into(), in_channels: 3, out_channels: 3, kind: LayerKind::Trg };
    let analyzed = mult_count(&layer, [3, 8, 5, 5], Algorithm::Direct).map_err(|e| e.to_string())?;
    ok &= worst <= 1e-12 && ops.mults == 0 && analyzed == 0;
    check(ok, format!("telescoping error {worst:.1e}, counted mults {}, analyzer mults {analyzed}", ops.mults))
}

fn basis_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut plans = Vec::new();
    for m in [2, 3, 4] {
        for r in [3, 5] {
            if m + r - 1 > 8 {
                continue;
            }
            let plan = WinogradPlan::new(m, r).map_err(|e| e.to_string())?;
            let n = m + r - 1;
            for j in 0..r {
                for k in 0..n {
                    let g: Vec<f64> = (0..r).map(|i| f64::from(u8::from(i == j))).collect();
                    let d: Vec<f64> = (0..n).map(|i| f64::from(u8::from(i == k))).collect();
                    let y = wino1d_tile(&plan, &g, &d).map_err(|e| e.to_string())?;
                    for (i, v) in y.iter().enumerate() {
                        worst = worst.max((v - f64::from(u8::from(k == i + j))).abs());
                    }
                }
            }
            plans.push(format!("F({m},{r})"));
        }
    }
    let f23 = WinogradPlan::new(2, 3).map_err(|e| e.to_string())?;
    let half = Rational::new(1, 2);
    let allowed = [Rational::from_integer(0), Rational::from_integer(1), -Rational::from_integer(1), half, -half];
    let small = [f23.at(), f23.g(), f23.bt()].iter().all(|mat| mat.entries().all(|e| allowed.contains(&e)));
    check(
        worst <= 1e-12 && small,
        format!(
            "{} on one-hot basis, max error {worst:.1e}; F(2,3) entries in {{0, ±1, ±1/2}}: {small}",
            plans.join(" ")
        ),
    )
}

fn determinism() -> Outcome {
    let args = ["lightconv3d", "verify", "--suite", "all", "--cases", "100", "--seed", "7"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = lightconv3d::cli::run(args, &mut out, &mut err);
        runs.push((code, out));
    }
    let identical = runs[0].1 == runs[1].1 && !runs[0].1.is_empty();

    let mut special = Tensor5::<f32>::random([2, 3, 4, 5, 6], 3).unwrap();
    special.data_mut()[..5].copy_from_slice(&[f32::NAN, -0.0, f32::INFINITY, f32::MIN_POSITIVE / 2.0, f32::MAX]);
    let wide = Tensor5::<f64>::random([1, 2, 3, 4, 5], 4).unwrap();
    let mut exact = true;
    for t in [DynTensor::from(special.clone()), DynTensor::from(wide.clone())] {
        let mut buf = Vec::new();
        match &t {
            DynTensor::F32(x) => write_t5df_to(x, &mut buf),
            DynTensor::F64(x) => write_t5df_to(x, &mut buf),
        }
        .map_err(|e| e.to_string())?;
        exact &= match (&t, read_t5df_from(buf.as_slice()).map_err(|e| e.to_string())?) {
            (DynTensor::F32(a), DynTensor::F32(b)) => {
                a.dims() == b.dims() && a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits())
            }
            (DynTensor::F64(a), DynTensor::F64(b)) => {
                a.dims() == b.dims() && a.data().iter().zip(b.data()).all(|(p, q)| p.to_bits() == q.to_bits())
            }
            _ => false,
        };
    }
    check(
        runs.iter().all(|r| r.0 == 0) && identical && exact,
        format!(
            "exit codes {} {}, stdout identical: {identical} ({} bytes), T5DF bit-exact: {exact}",
            runs[0].0,
            runs[1].0,
            runs[0].1.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("winograd oracle equivalence", oracle_equivalence),
        ("tile multiplication counts", tile_counts),
        ("layer compression table", layer_compression_table),
        ("typical block compression", typical_compression),
        ("hybrid reduction bracket", hybrid_reduction),
        ("temporal residual properties", trg_properties),
        ("plan basis check", basis_check),
        ("end-to-end determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(detail) => println!("PASS {} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
