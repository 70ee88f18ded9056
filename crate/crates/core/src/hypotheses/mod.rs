//! Random layout hypotheses: sample small groups of corner candidates and
//! grow each into a closed Manhattan room.

mod build;
mod layout;
mod sample;

pub use build::{build_layout, estimate_floor_height};
pub use layout::{
    check_layout, point_in_polygon, rectangle, validate_layout, LayoutModel, Provenance, Violation,
};
pub use sample::{group_is_admissible, sample_corner_group};

use std::collections::HashSet;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corners::CornerCandidate;
use crate::error::{Error, Result};
use crate::lines::{task_rng, VanishingBasis};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HypothesisConfig {
    /// Number of distinct hypotheses to produce.
    pub n_h: usize,
    pub group_sizes: Vec<usize>,
    /// Allowed deviation from a right angle, degrees.
    pub manhattan_tol_deg: f64,
    /// Sampling attempts allowed per requested hypothesis.
    pub attempts_per_hypothesis: usize,
    /// Same-quadrant corners closer than this in azimuth count as one, degrees.
    pub cluster_deg: f64,
    pub seed: u64,
}

impl Default for HypothesisConfig {
    fn default() -> Self {
        HypothesisConfig {
            n_h: 100,
            group_sizes: vec![3, 4, 5],
            manhattan_tol_deg: 5.0,
            attempts_per_hypothesis: 200,
            cluster_deg: 2.0,
            seed: 0,
        }
    }
}

impl HypothesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_h == 0 {
            return Err(Error::invalid("N_h must be at least 1"));
        }
        if self.group_sizes.is_empty() || self.group_sizes.iter().any(|&n| n < 3) {
            return Err(Error::invalid("corner group sizes must be at least 3"));
        }
        if !(self.manhattan_tol_deg > 0.0 && self.manhattan_tol_deg < 45.0) {
            return Err(Error::invalid(
                "manhattan tolerance must be in (0, 45) degrees",
            ));
        }
        if self.attempts_per_hypothesis == 0 {
            return Err(Error::invalid("attempt budget must be positive"));
        }
        Ok(())
    }
}

fn dedup_key(l: &LayoutModel) -> Vec<i64> {
    let q = |v: f64| (v / 1e-3).round() as i64;
    let pts: Vec<[i64; 2]> = l.polygon.iter().map(|p| [q(p[0]), q(p[1])]).collect();
    let start = (0..pts.len()).min_by_key(|&i| pts[i]).unwrap_or(0);
    let mut key: Vec<i64> = pts[start..]
        .iter()
        .chain(&pts[..start])
        .flatten()
        .copied()
        .collect();
    key.push(q(l.h));
    key
}

fn one_attempt(
    cands: &[CornerCandidate],
    cfg: &HypothesisConfig,
    attempt: usize,
) -> Option<LayoutModel> {
    let mut rng = task_rng(cfg.seed, attempt as u64);
    let n = cfg.group_sizes[rng.random_range(0..cfg.group_sizes.len())];
    let idx = sample_corner_group(cands, n, cfg.cluster_deg, &mut rng)?;
    let group: Vec<(usize, &CornerCandidate)> = idx.iter().map(|&i| (i, &cands[i])).collect();
    let mut layout = build_layout(&group, cfg)?;
    layout.provenance.attempt = attempt;
    Some(layout)
}

/// Sample and build until `n_h` distinct valid layouts exist or the
/// attempt budget runs out. Attempts run in parallel, each with its own
/// rng stream, and are collected in attempt order, so the output depends
/// only on the inputs and the seed. A smaller `n_h` yields a prefix of
/// the list a larger one would.
pub fn generate_hypotheses(
    cands: &[CornerCandidate],
    basis: &VanishingBasis,
    cfg: &HypothesisConfig,
) -> Result<Vec<LayoutModel>> {
    cfg.validate()?;
    if cands.is_empty() {
        return Err(Error::Generation("no corner candidates".into()));
    }
    let budget = cfg.attempts_per_hypothesis * cfg.n_h;
    let chunk = 64;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut start = 0;
    while start < budget && out.len() < cfg.n_h {
        let end = (start + chunk).min(budget);
        let built: Vec<Option<LayoutModel>> = (start..end)
            .into_par_iter()
            .map(|a| one_attempt(cands, cfg, a))
            .collect();
        for mut layout in built.into_iter().flatten() {
            if out.len() >= cfg.n_h {
                break;
            }
            if seen.insert(dedup_key(&layout)) {
                layout.rotation = basis.rotation;
                out.push(layout);
            }
        }
        start = end;
    }
    if out.is_empty() {
        return Err(Error::Generation(format!(
            "no valid layout after {budget} attempts from {} candidates",
            cands.len()
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corners::classify_corner;
    use nalgebra::{Unit, Vector3};

    fn box_corners(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> Vec<CornerCandidate> {
        let mut out = Vec::new();
        for (x, y) in [(x0, y0), (x0, y1), (x1, y0), (x1, y1)] {
            for z in [1.0, -h] {
                let dir = Unit::new_normalize(Vector3::new(x, y, z));
                let (hemisphere, quadrant) = classify_corner(&dir).unwrap();
                out.push(CornerCandidate {
                    dir,
                    hemisphere,
                    quadrant,
                    parents: (0, 0),
                    weight: 1.0,
                });
            }
        }
        out
    }

    #[test]
    fn clean_box_gives_valid_deterministic_hypotheses() {
        let cands = box_corners(-1.2, 1.8, -1.5, 0.9, 1.4);
        let cfg = HypothesisConfig {
            n_h: 10,
            ..Default::default()
        };
        let a = generate_hypotheses(&cands, &VanishingBasis::identity(), &cfg).unwrap();
        let b = generate_hypotheses(&cands, &VanishingBasis::identity(), &cfg).unwrap();
        assert_eq!(a, b);
        for l in &a {
            assert_eq!(validate_layout(l, 5.0), Ok(()));
            assert!((l.h - 1.4).abs() < 1e-9);
        }
    }

    #[test]
    fn triples_give_four_walls() {
        let cands = box_corners(-1.2, 1.8, -1.5, 0.9, 1.4);
        let cfg = HypothesisConfig {
            n_h: 5,
            group_sizes: vec![3],
            ..Default::default()
        };
        for l in generate_hypotheses(&cands, &VanishingBasis::identity(), &cfg).unwrap() {
            assert_eq!(l.wall_count(), 4);
        }
    }

    #[test]
    fn smaller_budget_is_a_prefix() {
        let cands = box_corners(-1.2, 1.8, -1.5, 0.9, 1.4);
        let basis = VanishingBasis::identity();
        let small = generate_hypotheses(
            &cands,
            &basis,
            &HypothesisConfig {
                n_h: 1,
                ..Default::default()
            },
        )
        .unwrap();
        let large = generate_hypotheses(
            &cands,
            &basis,
            &HypothesisConfig {
                n_h: 3,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(small[..], large[..small.len()]);
        assert_eq!(validate_layout(&small[0], 5.0), Ok(()));
    }

    #[test]
    fn unusable_candidates_are_an_error() {
        let cands: Vec<_> = box_corners(-1.0, 1.0, -1.0, 1.0, 1.0)
            .into_iter()
            .filter(|c| c.dir.z > 0.0)
            .collect();
        let err = generate_hypotheses(
            &cands,
            &VanishingBasis::identity(),
            &HypothesisConfig {
                n_h: 2,
                ..Default::default()
            },
        );
        assert!(matches!(err, Err(Error::Generation(_))));
    }
}
