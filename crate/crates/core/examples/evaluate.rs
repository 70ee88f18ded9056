//! Render layouts as per-pixel orientation labels and score them with
//! the equal-orientation proportion (EOP).

use panolayout::evaluation::{eop, render_labels, score_hypotheses, select_best};
use panolayout::geometry::Dims;
use panolayout::hypotheses::rectangle;
use panolayout::synthetic::{ground_truth_labels, SceneSpec};

fn main() -> panolayout::error::Result<()> {
    let dims = Dims::panorama(256);
    let spec = SceneSpec::unit_box();
    let gt = ground_truth_labels(&spec, dims);

    let candidates = vec![
        rectangle(-1.0, 1.0, -1.0, 1.0, 1.0),
        rectangle(-1.0, 1.0, -1.0, 1.0, 1.5),
        rectangle(-2.0, 1.0, -1.0, 1.0, 1.0),
        rectangle(-0.5, 0.5, -3.0, 3.0, 0.8),
    ];
    for (l, s) in candidates.iter().zip(score_hypotheses(&candidates, &gt)?) {
        println!("{:?} h {:.1}: EOP {s:.4}", l.polygon, l.h);
    }
    let (best, score) = select_best(&candidates, &gt)?;
    println!("best is #{best} with {score:.4}");

    let rendered = render_labels(&candidates[best], dims)?;
    let [x, y, z] = rendered.fractions();
    println!(
        "label shares x {x:.3} y {y:.3} z {z:.3}, self EOP {}",
        eop(&rendered, &rendered)?
    );
    Ok(())
}
