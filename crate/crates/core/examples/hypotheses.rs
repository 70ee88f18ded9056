//! Sample corner groups into closed Manhattan layouts.

use panolayout::corners::{extract_corner_candidates, CornerConfig};
use panolayout::hypotheses::{generate_hypotheses, validate_layout, HypothesisConfig};
use panolayout::lines::{detect_lines, ThresholdConfig};
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let spec = SceneSpec::random(6, 0, 21)?;
    let pano = synthetic_inputs(&spec, 512, DEFAULT_EDGE_SIGMA_PX)?.panorama;
    let det = detect_lines(&pano, &ThresholdConfig::default())?;
    let corners = extract_corner_candidates(&det.classified, &det.basis, &CornerConfig::default());

    let cfg = HypothesisConfig {
        n_h: 40,
        ..Default::default()
    };
    let hyps = generate_hypotheses(&corners, &det.basis, &cfg)?;
    println!(
        "{} hypotheses from {} corners (true room: {} walls, h {:.3})",
        hyps.len(),
        corners.len(),
        spec.walls(),
        spec.h
    );
    let mut by_walls = std::collections::BTreeMap::new();
    for l in &hyps {
        assert!(validate_layout(l, cfg.manhattan_tol_deg).is_ok());
        *by_walls.entry(l.wall_count()).or_insert(0) += 1;
    }
    for (walls, n) in by_walls {
        println!("  {walls} walls: {n}");
    }
    for l in hyps.iter().take(3) {
        println!(
            "  h {:.3}, area {:.3}, corners {:?}",
            l.h,
            l.signed_area().abs(),
            l.provenance.corners
        );
    }
    Ok(())
}
