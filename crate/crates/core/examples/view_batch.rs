//! Split a panorama into perspective views for per-view networks, write
//! stand-in network outputs, and stitch them back into panorama maps.
//!
//! cargo run --release --example view_batch -- [OUT_DIR]

use std::path::PathBuf;

use panolayout::geometry::Dims;
use panolayout::io::{load_view_maps, write_stub_outputs, write_view_batch};
use panolayout::pipeline::ViewConfig;
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "out/views".into()),
    );
    let spec = SceneSpec::random(4, 2, 9)?;
    let inputs = synthetic_inputs(&spec, 256, DEFAULT_EDGE_SIGMA_PX)?;

    let cfg = ViewConfig {
        resolution: 160,
        ..Default::default()
    };
    let manifest = write_view_batch(&inputs.panorama, &cfg, &out)?;
    println!(
        "{} views of {} px at {} deg",
        manifest.views.len(),
        cfg.resolution,
        cfg.fov_deg
    );

    write_stub_outputs(
        &manifest,
        &out,
        inputs.edge_map.as_ref().unwrap(),
        inputs.normal_map.as_ref().unwrap(),
    )?;
    let (edges, normals) = load_view_maps(&out.join("views.json"), Dims::panorama(256))?;
    let (edges, normals) = (edges.unwrap(), normals.unwrap());

    let original = inputs.edge_map.unwrap();
    let diff = edges
        .values()
        .iter()
        .zip(original.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f32, f32::max);
    let known = normals.normals().iter().filter(|n| n.is_some()).count();
    println!(
        "stitched edge map max difference {diff:.3}, {known} of {} normals set",
        normals.normals().len()
    );
    Ok(())
}
