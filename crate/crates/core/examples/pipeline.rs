//! Full run on a synthetic scene in both modes, geometry only (G) and with
//! the edge-map filter (G+DL), writing every output of the G+DL run.
//!
//! cargo run --release --example pipeline -- [OUT_DIR]

use std::path::PathBuf;

use panolayout::pipeline::{run_pipeline_on, write_outputs, PipelineConfig};
use panolayout::synthetic::{synthetic_inputs, SceneSpec, DEFAULT_EDGE_SIGMA_PX};

fn main() -> panolayout::error::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/run".into()));
    let spec = SceneSpec::random_cluttered(6, 3.0, 2)?;
    let inputs = synthetic_inputs(&spec, 512, DEFAULT_EDGE_SIGMA_PX)?;

    for use_edge_map in [false, true] {
        let cfg = PipelineConfig {
            use_edge_map,
            ..Default::default()
        };
        let run = run_pipeline_on(&inputs, &cfg)?;
        let r = &run.report;
        println!(
            "{:5} lines {}/{} kept, {} corners, {} hypotheses, best {} walls, EOP {:.4}, {:.0} ms",
            r.mode.to_string(),
            r.lines_kept,
            r.lines_classified,
            r.corners,
            r.hypotheses,
            run.best.wall_count(),
            r.eop_gt.unwrap_or(f64::NAN),
            r.timings.total
        );
        if use_edge_map {
            write_outputs(&run, &inputs.panorama, &out)?;
            println!("outputs in {}", out.display());
        }
    }
    Ok(())
}
