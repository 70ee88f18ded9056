//! Repeated runs over a small synthetic suite, summarised per mode and
//! hypothesis budget, with CSV and JSON reports.
//!
//! cargo run --release --example bench -- [OUT_DIR]

use std::path::PathBuf;

use panolayout::bench::{bench, BenchConfig, BenchScene};
use panolayout::pipeline::Mode;
use panolayout::synthetic::SceneSpec;

fn main() -> panolayout::error::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "out/bench".into()),
    );
    let scenes = [(4, 0), (6, 1), (8, 2)]
        .iter()
        .map(|&(walls, seed)| {
            BenchScene::synthetic(&SceneSpec::random_cluttered(walls, 3.0, seed)?, 512)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let cfg = BenchConfig {
        repeats: 3,
        n_h_values: vec![10, 50, 100],
        modes: vec![Mode::Geometry, Mode::GeometryDl],
        ..Default::default()
    };
    let report = bench(&scenes, &cfg)?;
    println!(
        "{:6} {:>5} {:>8} {:>8} {:>9}",
        "mode", "n_h", "EOP", "kept", "ms"
    );
    for g in &report.groups {
        println!(
            "{:6} {:>5} {:>8.4} {:>8.1} {:>9.0}",
            g.mode.to_string(),
            g.n_h,
            g.eop.median,
            g.median_lines_kept,
            g.ms_total.median
        );
    }
    for p in report.write(&out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
