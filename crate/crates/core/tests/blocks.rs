use std::path::PathBuf;

use lightconv3d::blocks::{
    fsb_forward, model_forward, model_parse, random_weights, trg_forward, Backend, FsbWeights, LayerKind,
};
use lightconv3d::direct::{conv1d_temporal, conv2d_depthwise, conv_pointwise, ConvGeometry};
use lightconv3d::tensor::{scaled_rel_error, Tensor5};
use lightconv3d::winograd::{hfa_fsb_forward, HybridPlan};
use lightconv3d::Error;

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn shipped_c3d_config() {
    let spec = model_parse(config("c3d.cfg")).unwrap();
    let convs: Vec<_> = spec
        .layers
        .iter()
        .filter(|l| matches!(l.kind, LayerKind::Conv3d { .. }))
        .map(|l| (l.name.as_str(), l.out_channels, l.in_channels))
        .collect();
    assert_eq!(
        convs,
        [
            ("conv1", 64, 3),
            ("conv2", 128, 64),
            ("conv3", 256, 128),
            ("conv4", 256, 256),
            ("conv5", 512, 256),
            ("conv6a", 512, 512),
            ("conv6b", 512, 512),
            ("conv6c", 512, 512),
        ]
    );
    let stages: std::collections::BTreeSet<_> = convs.iter().map(|c| &c.0[..5]).collect();
    assert_eq!(stages.len(), 6);
}

#[test]
fn shipped_fsb_c3d_config() {
    let spec = model_parse(config("fsb_c3d.cfg")).unwrap();
    let mids: Vec<usize> = spec
        .layers
        .iter()
        .filter_map(|l| match l.kind {
            LayerKind::Fsb { mid, .. } => Some(mid),
            _ => None,
        })
        .collect();
    assert_eq!(mids, [64, 64, 128, 128, 256, 512, 512, 512]);
    let kinds: Vec<&str> = spec.layers.iter().map(|l| l.kind_name()).collect();
    assert_eq!(&kinds[..5], ["trg", "fsb", "pool", "trg", "fsb"]);
    assert_eq!(kinds.iter().filter(|k| **k == "trg").count(), 2);
}

#[test]
fn fsb_c3d_runs_end_to_end() {
    let spec = model_parse(config("fsb_c3d.cfg")).unwrap().with_input([3, 16, 32, 32]).unwrap();
    let [c, t, h, w] = spec.output_shape().unwrap();
    assert_eq!([c, t, h, w], [512, 2, 2, 2]);
    let weights = random_weights::<f32>(&spec, 5).unwrap();
    let x = Tensor5::<f32>::random([1, 3, 16, 32, 32], 6).unwrap();
    let direct = model_forward(&spec, &weights, &x, Backend::Direct).unwrap();
    assert_eq!(direct.dims(), [1, c, t, h, w]);
    let fast = model_forward(&spec, &weights, &x, Backend::Fast { m: 2, m1: 2, m2: 2 }).unwrap();
    assert!(scaled_rel_error(&fast, &direct).unwrap() <= 1e-3);
}

#[test]
fn config_errors_name_layer_and_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    std::fs::write(
        &path,
        r#"{"name": "bad", "input": [3, 8, 8, 8], "layers": [{"kind": "trg"}, {"kind": "fsb", "out": 4}]}"#,
    )
    .unwrap();
    let err = model_parse(&path).unwrap_err();
    assert!(matches!(err, Error::Config { layer: Some(1), .. }));
    assert!(err.to_string().contains("layer 1, field `k`"), "{err}");
    assert!(matches!(model_parse(dir.path().join("missing.cfg")), Err(Error::Io(_))));
}

#[test]
fn wide_block_equals_composed_pipeline_and_hybrid_path() {
    let x = Tensor5::<f32>::random([1, 64, 8, 16, 16], 1).unwrap();
    let w = FsbWeights::<f32>::random(64, 64, 64, [3, 3, 3], 2).unwrap();
    let geom = ConvGeometry::same([3, 3, 3]);
    let block = fsb_forward(&x, &w, &geom).unwrap();

    let a = conv1d_temporal(&x, &w.stage1, &ConvGeometry::with_pad([1, 0, 0])).unwrap();
    let b = conv2d_depthwise(&a, &w.stage2, &ConvGeometry::with_pad([0, 1, 1]).groups(64)).unwrap();
    let composed = conv_pointwise(&b, &w.stage3).unwrap();
    assert_eq!(block, composed);

    let fast = hfa_fsb_forward(&x, &w, &HybridPlan::new(2, 3, 2, 3).unwrap(), &geom).unwrap();
    assert!(scaled_rel_error(&fast, &block).unwrap() <= 1e-3);
}

#[test]
fn trg_output_feeds_trg() {
    let x = Tensor5::<f64>::random([2, 3, 6, 4, 4], 9).unwrap();
    let once = trg_forward(&x).unwrap();
    let twice = trg_forward(&once).unwrap();
    assert_eq!(twice.dims(), x.dims());
    // Second-order differences of the first three frames.
    for p in 0..16 {
        let (py, px) = (p / 4, p % 4);
        let want = x[[0, 0, 2, py, px]] - 2.0 * x[[0, 0, 1, py, px]] + x[[0, 0, 0, py, px]];
        assert!((twice[[0, 0, 0, py, px]] - want).abs() < 1e-14);
    }
}
