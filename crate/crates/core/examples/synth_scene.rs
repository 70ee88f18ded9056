//! Generate a cluttered synthetic room and write its panorama, edge map,
//! normal map, ground-truth labels and layout to a directory.
//!
//! cargo run --release --example synth_scene -- [OUT_DIR] [WALLS] [SEED]

use std::path::PathBuf;

use panolayout::io::write_scene;
use panolayout::synthetic::{SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/scene".into()));
    let walls = args
        .next()
        .map_or(6, |s| s.parse().expect("WALLS must be an integer"));
    let seed = args
        .next()
        .map_or(7, |s| s.parse().expect("SEED must be an integer"));

    let spec = SceneSpec::random_cluttered(walls, 3.0, seed)?;
    println!(
        "{} walls, floor at -{:.2}, yaw {:.1} deg, {} clutter rects",
        spec.walls(),
        spec.h,
        spec.yaw_deg,
        spec.clutter.len()
    );
    let manifest = write_scene(&spec, 512, DEFAULT_EDGE_SIGMA_PX, &out)?;
    println!("wrote {} ({:?})", out.display(), manifest.files);
    Ok(())
}
