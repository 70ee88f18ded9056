//! Room-corner candidates from pairs of differently oriented lines.

use nalgebra::Unit;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, UnitVec3, Vec3};
use crate::lines::{Axis, GreatCircleSegment, VanishingBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Hemisphere {
    Ceiling,
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Quadrant {
    Q1,
    Q2,
    Q3,
    Q4,
}

impl Quadrant {
    pub const ALL: [Quadrant; 4] = [Quadrant::Q1, Quadrant::Q2, Quadrant::Q3, Quadrant::Q4];

    /// Quadrant of a point or direction by the signs of its horizontal
    /// components; `None` on a divider.
    pub fn of(x: f64, y: f64) -> Option<Quadrant> {
        if x.abs() < 1e-9 || y.abs() < 1e-9 {
            return None;
        }
        Some(match (x > 0.0, y > 0.0) {
            (true, true) => Quadrant::Q1,
            (false, true) => Quadrant::Q2,
            (false, false) => Quadrant::Q3,
            (true, false) => Quadrant::Q4,
        })
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// A potential wall/ceiling or wall/floor junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerCandidate {
    /// Direction in the Manhattan (basis) frame.
    pub dir: UnitVec3,
    pub hemisphere: Hemisphere,
    pub quadrant: Quadrant,
    /// Indices of the two lines that produced it.
    pub parents: (usize, usize),
    /// Combined inlier support of the parents.
    pub weight: f64,
}

impl CornerCandidate {
    pub fn azimuth(&self) -> f64 {
        self.dir.y.atan2(self.dir.x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CornerConfig {
    /// A corner must lie within this arc of an endpoint of both lines, degrees.
    pub gap_tol_deg: f64,
    /// How far a corner may sit inside a line's span, degrees.
    pub overshoot_tol_deg: f64,
    /// Candidates closer than this are merged, degrees.
    pub dedup_deg: f64,
}

impl Default for CornerConfig {
    fn default() -> Self {
        CornerConfig {
            gap_tol_deg: 10.0,
            overshoot_tol_deg: 2.0,
            dedup_deg: 1.0,
        }
    }
}

impl CornerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap_tol_deg > 0.0 && self.overshoot_tol_deg >= 0.0 && self.dedup_deg >= 0.0) {
            return Err(Error::invalid(
                "corner tolerances must be non-negative, gap positive",
            ));
        }
        Ok(())
    }
}

fn depth_inside(seg: &GreatCircleSegment, dir: &Vec3) -> f64 {
    if !seg.contains(dir) {
        return 0.0;
    }
    let t = seg.arc_param(dir);
    t.min(seg.arc_angle() - t)
}

/// Where the great circles of `a` and `b` meet, if that point is near an
/// end of both segments without cutting through either one.
pub fn intersect_lines(
    a: &GreatCircleSegment,
    b: &GreatCircleSegment,
    cfg: &CornerConfig,
) -> Option<UnitVec3> {
    let v = a.normal.cross(&b.normal);
    if v.norm() < 1e-6 {
        return None;
    }
    let gap = cfg.gap_tol_deg.to_radians();
    let over = cfg.overshoot_tol_deg.to_radians();
    let v = v.normalize();
    [v, -v]
        .into_iter()
        .find(|c| {
            a.endpoint_distance(c) <= gap
                && b.endpoint_distance(c) <= gap
                && depth_inside(a, c) <= over
                && depth_inside(b, c) <= over
        })
        .map(Unit::new_unchecked)
}

/// Hemisphere and quadrant of a direction given in the basis frame.
pub fn classify_corner(dir: &Vec3) -> Result<(Hemisphere, Quadrant)> {
    if dir.z.abs() < 1e-9 {
        return Err(Error::invalid("corner lies on the horizon"));
    }
    let q = Quadrant::of(dir.x, dir.y)
        .ok_or_else(|| Error::invalid("corner lies on a quadrant divider"))?;
    let h = if dir.z > 0.0 {
        Hemisphere::Ceiling
    } else {
        Hemisphere::Floor
    };
    Ok((h, q))
}

/// Intersect every pair of differently oriented lines, classify the
/// survivors and merge near-duplicates. Each merged cluster is represented
/// by its best-supported member so the corner stays exactly on both of
/// its parent circles.
pub fn extract_corner_candidates(
    lines: &[GreatCircleSegment],
    basis: &VanishingBasis,
    cfg: &CornerConfig,
) -> Vec<CornerCandidate> {
    let mut raw = Vec::new();
    for i in 0..lines.len() {
        for j in i + 1..lines.len() {
            let (a, b) = (&lines[i], &lines[j]);
            if a.axis == b.axis || a.axis == Axis::Unclassified || b.axis == Axis::Unclassified {
                continue;
            }
            let Some(world) = intersect_lines(a, b, cfg) else {
                continue;
            };
            let dir = Unit::new_normalize(basis.to_local(&world));
            let Ok((hemisphere, quadrant)) = classify_corner(&dir) else {
                continue;
            };
            raw.push(CornerCandidate {
                dir,
                hemisphere,
                quadrant,
                parents: (i, j),
                weight: (a.inlier_count + b.inlier_count) as f64,
            });
        }
    }
    dedup_corners(raw, cfg.dedup_deg)
}

/// Greedy clustering: strongest candidates first, each absorbing every
/// weaker one within `tol_deg`.
pub fn dedup_corners(mut cands: Vec<CornerCandidate>, tol_deg: f64) -> Vec<CornerCandidate> {
    let tol = tol_deg.to_radians();
    cands.sort_by(|a, b| {
        b.weight
            .total_cmp(&a.weight)
            .then(a.parents.cmp(&b.parents))
    });
    let mut kept: Vec<CornerCandidate> = Vec::new();
    for c in cands {
        if kept.iter().any(|k| angle_between(&k.dir, &c.dir) <= tol) {
            continue;
        }
        kept.push(c);
    }
    kept
}
