//! Score classified lines against an edge-probability map and keep the
//! structural ones. Wall clutter (doors, windows) is dropped.

use panolayout::lines::{detect_lines, ThresholdConfig};
use panolayout::structural::{
    filter_structural_lines, label_normals, score_line, threshold_probability, FilterConfig,
};
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let spec = SceneSpec::random_cluttered(4, 3.0, 11)?;
    let inputs = synthetic_inputs(&spec, 512, DEFAULT_EDGE_SIGMA_PX)?;
    let edge_map = inputs.edge_map.expect("synthetic scenes carry an edge map");
    let normals = inputs
        .normal_map
        .expect("synthetic scenes carry a normal map");

    let det = detect_lines(&inputs.panorama, &ThresholdConfig::default())?;
    let cfg = FilterConfig::default();
    let map = threshold_probability(&edge_map, cfg.tau)?;
    let kept = filter_structural_lines(&det.classified, &map, cfg.score_fraction);
    for l in &kept {
        let (score, len) = score_line(l, &map);
        println!(
            "{:?} {:6.1} deg  score/length {:.3}",
            l.axis,
            l.arc_angle().to_degrees(),
            score / len.max(1) as f64
        );
    }
    println!(
        "{} clutter rects, kept {} of {} lines",
        spec.clutter.len(),
        kept.len(),
        det.classified.len()
    );

    let labels = label_normals(&normals, &det.basis, cfg.normal_angle_tol_deg);
    let [x, y, z] = labels.fractions();
    println!("normal labels: x {x:.2} y {y:.2} z {z:.2}");
    Ok(())
}
