//! Intersect classified lines into ceiling and floor corner candidates and
//! draw them over the panorama.
//!
//! cargo run --release --example corners -- [OUT_PNG]

use panolayout::corners::{extract_corner_candidates, CornerConfig, Hemisphere};
use panolayout::io::write_corner_overlay;
use panolayout::lines::{detect_lines, ThresholdConfig};
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "out/corners.png".into());
    let spec = SceneSpec::random(6, 0, 5)?;
    let pano = synthetic_inputs(&spec, 512, DEFAULT_EDGE_SIGMA_PX)?.panorama;
    let det = detect_lines(&pano, &ThresholdConfig::default())?;

    let corners = extract_corner_candidates(&det.classified, &det.basis, &CornerConfig::default());
    let ceiling = corners
        .iter()
        .filter(|c| c.hemisphere == Hemisphere::Ceiling)
        .count();
    println!(
        "{} candidates ({} ceiling, {} floor) for a room with {} true corners",
        corners.len(),
        ceiling,
        corners.len() - ceiling,
        2 * spec.walls()
    );
    for c in corners.iter().take(8) {
        println!(
            "  {:?} {:?} azimuth {:7.2} deg, weight {}",
            c.hemisphere,
            c.quadrant,
            c.azimuth().to_degrees(),
            c.weight
        );
    }
    if let Some(dir) = std::path::Path::new(&out).parent() {
        std::fs::create_dir_all(dir).ok();
    }
    write_corner_overlay(
        &pano,
        &det.classified,
        &corners,
        &det.basis,
        std::path::Path::new(&out),
    )?;
    println!("overlay written to {out}");
    Ok(())
}
