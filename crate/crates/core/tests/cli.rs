use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lightconv3d::blocks::trg_forward;
use lightconv3d::tensor::{read_t5df, write_t5df, DynTensor, Tensor5};

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lightconv3d")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn config(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name).display().to_string()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_is_deterministic_and_passes() {
    let args = ["verify", "--suite", "all", "--cases", "20", "--seed", "3"];
    let a = bin(&args);
    let b = bin(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("seed 3"));
    assert!(text.contains("all 6 suites passed"));

    let f32 = bin(&["verify", "--suite", "hfa", "--cases", "10", "--dtype", "f32"]);
    assert_eq!(f32.status.code(), Some(0));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        &["verify", "--suite", "bogus"][..],
        &["verify", "--cases", "0"],
        &["frobnicate"],
        &["analyze"],
        &["bench", "--op", "conv3d", "--shape", "1,2,3"],
    ] {
        let o = bin(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}

#[test]
fn analyze_reports_totals() {
    let o = bin(&["analyze", "--model", &config("fsb_c3d.cfg")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("3731136") || text.contains("3,731,136"), "{text}");
    assert!(text.contains("27653184") || text.contains("27,653,184"), "{text}");

    let o = bin(&["analyze", "--model", &config("fsb_c3d.cfg"), "--format", "csv"]);
    let text = stdout(&o);
    assert_eq!(
        text.lines().next().unwrap(),
        "layer,kind,in_shape,out_shape,params_base,params_fsb,rate,mults_direct,mults_wino3d,mults_fsb,mults_hfa"
    );
    let fsb_rows = text.lines().filter(|l| l.split(',').nth(1) == Some("fsb")).count();
    assert_eq!(fsb_rows, 8);

    let small = bin(&["analyze", "--model", &config("c3d.cfg"), "--input", "3,16,56,56", "--variants", "direct"]);
    assert_eq!(small.status.code(), Some(0));
    assert_eq!(bin(&["analyze", "--model", "/nonexistent.cfg"]).status.code(), Some(2));
}

#[test]
fn trg_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b, c) = (dir.path().join("a.t5"), dir.path().join("b.t5"), dir.path().join("c.t5"));
    let x = Tensor5::<f32>::random([1, 2, 5, 3, 4], 11).unwrap();
    write_t5df(&x, &a).unwrap();
    assert_eq!(bin(&["trg", "--in", path_str(&a), "--out", path_str(&b)]).status.code(), Some(0));
    assert_eq!(bin(&["trg", "--in", path_str(&b), "--out", path_str(&c)]).status.code(), Some(0));
    assert_eq!(read_t5df(&c).unwrap(), DynTensor::from(trg_forward(&trg_forward(&x).unwrap()).unwrap()));

    let flat = Tensor5::<f64>::new([1, 1, 4, 2, 2], 2.5).unwrap();
    write_t5df(&flat, &a).unwrap();
    assert_eq!(bin(&["trg", "--in", path_str(&a), "--out", path_str(&b)]).status.code(), Some(0));
    let DynTensor::F64(y) = read_t5df(&b).unwrap() else { panic!("dtype changed") };
    for t in 0..4 {
        let want = if t == 3 { 2.5 } else { 0.0 };
        assert!((0..4).all(|p| y[[0, 0, t, p / 2, p % 2]] == want));
    }

    write_t5df(&Tensor5::<f32>::new([1, 1, 1, 2, 2], 1.0).unwrap(), &a).unwrap();
    assert_eq!(bin(&["trg", "--in", path_str(&a), "--out", path_str(&b)]).status.code(), Some(2));
    std::fs::write(&a, b"T5DFgarbage").unwrap();
    assert_eq!(bin(&["trg", "--in", path_str(&a), "--out", path_str(&b)]).status.code(), Some(2));
}

#[test]
fn bench_prints_rows() {
    let o = bin(&["bench", "--op", "hfa", "--shape", "1,4,4,8,8", "--repeat", "1"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 5, "{text}");
    assert!(text.contains("stage2 depthwise"));
    let o = bin(&["bench", "--op", "conv3d", "--shape", "1,2,3,4,4"]);
    assert!(stdout(&o).contains("repeat 5"));
}
