//! The view-batch boundary with the per-view networks: manifest and PNG
//! layout, stitching, and the pipeline fed from stitched maps.

use std::path::Path;
use std::process::Command;

use panolayout::geometry::Dims;
use panolayout::io::{
    decode_normal, encode_normal, load_view_maps, read_json, write_stub_outputs, write_view_batch,
    ViewBatchManifest,
};
use panolayout::pipeline::{run_pipeline_on, PipelineConfig, ViewConfig};
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};
use proptest::prelude::*;
use tempfile::TempDir;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn sixty_view_batch_stitches_and_runs() {
    let tmp = TempDir::new().unwrap();
    let spec = SceneSpec::random_cluttered(6, 3.0, 4).unwrap();
    let mut inputs = synthetic_inputs(&spec, 256, DEFAULT_EDGE_SIGMA_PX).unwrap();
    let cfg = ViewConfig {
        resolution: 128,
        ..Default::default()
    };
    let manifest = write_view_batch(&inputs.panorama, &cfg, tmp.path()).unwrap();
    assert_eq!(manifest.views.len(), 60);
    for v in &manifest.views {
        let img = image::open(tmp.path().join(&v.image)).unwrap();
        assert_eq!((img.width(), img.height()), (128, 128));
    }
    let back: ViewBatchManifest = read_json(&tmp.path().join("views.json")).unwrap();
    assert_eq!(back, manifest);

    write_stub_outputs(
        &manifest,
        tmp.path(),
        inputs.edge_map.as_ref().unwrap(),
        inputs.normal_map.as_ref().unwrap(),
    )
    .unwrap();
    for v in &manifest.views {
        assert!(manifest.edge_output(tmp.path(), &v.id).exists());
        assert!(manifest.normal_output(tmp.path(), &v.id).exists());
    }
    let (edge, normals) =
        load_view_maps(&tmp.path().join("views.json"), Dims::panorama(256)).unwrap();
    inputs.edge_map = edge;
    inputs.normal_map = normals;
    let out = run_pipeline_on(&inputs, &PipelineConfig::default()).unwrap();
    assert!(!out.report.filtering_skipped);
    assert!(out.report.eop_gt.unwrap() > 0.95, "{:?}", out.report.eop_gt);
}

#[test]
fn missing_view_outputs_are_format_errors() {
    let tmp = TempDir::new().unwrap();
    let inputs = synthetic_inputs(&SceneSpec::unit_box(), 64, DEFAULT_EDGE_SIGMA_PX).unwrap();
    let cfg = ViewConfig {
        count: 8,
        resolution: 32,
        ..Default::default()
    };
    let manifest = write_view_batch(&inputs.panorama, &cfg, tmp.path()).unwrap();
    write_stub_outputs(
        &manifest,
        tmp.path(),
        inputs.edge_map.as_ref().unwrap(),
        inputs.normal_map.as_ref().unwrap(),
    )
    .unwrap();
    std::fs::remove_file(manifest.edge_output(tmp.path(), &manifest.views[3].id)).unwrap();
    let err = load_view_maps(&tmp.path().join("views.json"), Dims::panorama(64)).unwrap_err();
    assert_eq!(panolayout::cli::exit_code(&err), 3, "{err}");
}

#[test]
fn cli_views_stitch_run() {
    let tmp = TempDir::new().unwrap();
    let bin = env!("CARGO_BIN_EXE_panolayout");
    let scene = tmp.path().join("scene");
    let views = tmp.path().join("views");
    let maps = tmp.path().join("maps");
    let ok = |args: &[&str]| {
        let o = Command::new(bin).args(args).output().unwrap();
        assert!(
            o.status.success(),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    };
    ok(&[
        "synth",
        "--walls",
        "4",
        "--clutter",
        "2",
        "--seed",
        "8",
        "--rows",
        "256",
        "--out",
        s(&scene),
    ]);
    ok(&[
        "views",
        "--panorama",
        s(&scene.join("panorama.png")),
        "--resolution",
        "96",
        "--stub",
        s(&scene.join("edge_map.png")),
        s(&scene.join("normals.png")),
        "--out",
        s(&views),
    ]);
    assert_eq!(std::fs::read_dir(views.join("maps")).unwrap().count(), 120);
    ok(&[
        "stitch",
        "--manifest",
        s(&views.join("views.json")),
        "--rows",
        "256",
        "--out",
        s(&maps),
    ]);
    ok(&[
        "run",
        "--scene",
        s(&scene),
        "--views",
        s(&views.join("views.json")),
        "--out",
        s(&tmp.path().join("run")),
    ]);
    ok(&[
        "run",
        "--panorama",
        s(&scene.join("panorama.png")),
        "--edge-map",
        s(&maps.join("edge_map.png")),
        "--normal-map",
        s(&maps.join("normals.png")),
    ]);
}

proptest! {
    #[test]
    fn normal_encoding_round_trip_within_one_level(theta in 0.0f64..std::f64::consts::PI, phi in -3.2f64..3.2) {
        let n = panolayout::geometry::Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
        let back = decode_normal(encode_normal(Some(&n))).unwrap();
        for k in 0..3 {
            prop_assert!((back[k] - n[k]).abs() <= 1.0 / 255.0 + 1e-12);
        }
    }
}

#[test]
fn nil_normals_encode_black() {
    assert_eq!(encode_normal(None), [0, 0, 0]);
    assert_eq!(decode_normal([0, 0, 0]), None);
}
