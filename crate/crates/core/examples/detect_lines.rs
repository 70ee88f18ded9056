//! Detect great-circle lines on a panorama and recover its Manhattan frame.

use panolayout::lines::{basis_angle_error, detect_lines, Axis, ThresholdConfig};
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let spec = SceneSpec::random(6, 2, 3)?;
    let pano = synthetic_inputs(&spec, 512, DEFAULT_EDGE_SIGMA_PX)?.panorama;

    let det = detect_lines(&pano, &ThresholdConfig::default())?;
    let count = |a: Axis| det.classified.iter().filter(|l| l.axis == a).count();
    println!(
        "{} segments fitted, {} classified",
        det.segments.len(),
        det.classified.len()
    );
    println!(
        "  x: {}  y: {}  z: {}",
        count(Axis::X),
        count(Axis::Y),
        count(Axis::Z)
    );
    println!(
        "frame error against the scene rotation: {:.3} deg",
        basis_angle_error(&det.basis.rotation, &spec.rotation())
    );
    for l in det.classified.iter().take(5) {
        println!(
            "  {:?} arc {:6.2} deg, {} inliers",
            l.axis,
            l.arc_angle().to_degrees(),
            l.inlier_count
        );
    }
    Ok(())
}
