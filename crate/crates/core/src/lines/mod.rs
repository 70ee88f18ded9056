//! Great-circle line detection and Manhattan vanishing directions.
//!
//! A straight world line projects onto a great circle of the viewing sphere,
//! so each line is stored as the unit normal of the plane through the line
//! and the camera centre, plus the two extremal rays of its visible arc.

mod classify;
mod edges;
mod fit;
mod groups;
mod vanishing;

pub use classify::classify_lines;
pub use edges::{detect_edges, EdgeMap};
pub use fit::{fit_great_circle, merge_collinear, ransac_great_circle};
pub use groups::{cluster_edge_groups, split_edge_group, EdgeGroup};
pub use vanishing::{basis_angle_error, estimate_vanishing_basis, VanishingBasis};

use nalgebra::Unit;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, angle_to_circle, EquirectImage, UnitVec3, Vec3};

/// Manhattan direction a world line is parallel to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
    Unclassified,
}

impl Axis {
    pub const MANHATTAN: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> Option<usize> {
        match self {
            Axis::X => Some(0),
            Axis::Y => Some(1),
            Axis::Z => Some(2),
            Axis::Unclassified => None,
        }
    }

    pub fn from_index(i: usize) -> Axis {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            2 => Axis::Z,
            _ => Axis::Unclassified,
        }
    }
}

/// Tunables for edge extraction, circle fitting and vanishing points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdConfig {
    /// Line/VP inlier angle in degrees.
    pub theta_th_deg: f64,
    /// Orthogonality tolerance between candidate VPs, degrees.
    pub vp_orthogonality_deg: f64,
    pub canny_sigma: f64,
    /// Hysteresis thresholds as fractions of the maximum gradient.
    pub canny_low: f64,
    pub canny_high: f64,
    /// Minimum edge-group size in pixels; `None` scales 30 px at 1024 wide.
    pub min_group_size: Option<usize>,
    pub ransac_confidence: f64,
    pub ransac_max_iterations: usize,
    /// Pixels closer than this (Chebyshev) join the same run when splitting groups.
    pub run_gap_px: usize,
    /// Collinear segments whose arcs are closer than this are merged, degrees.
    pub merge_gap_deg: f64,
    pub seed: u64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            theta_th_deg: 0.5,
            vp_orthogonality_deg: 0.5,
            canny_sigma: 1.4,
            canny_low: 0.1,
            canny_high: 0.2,
            min_group_size: None,
            ransac_confidence: 0.999,
            ransac_max_iterations: 500,
            run_gap_px: 2,
            merge_gap_deg: 2.0,
            seed: 0,
        }
    }
}

impl ThresholdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_th_deg > 0.0) {
            return Err(Error::invalid("theta_th must be positive"));
        }
        if !(self.canny_sigma > 0.0) {
            return Err(Error::invalid("canny sigma must be positive"));
        }
        if !(0.0 <= self.canny_low && self.canny_low <= self.canny_high && self.canny_high <= 1.0) {
            return Err(Error::invalid(
                "canny thresholds must satisfy 0 <= low <= high <= 1",
            ));
        }
        if !(self.ransac_confidence > 0.0 && self.ransac_confidence < 1.0) {
            return Err(Error::invalid("ransac confidence must be in (0, 1)"));
        }
        if self.ransac_max_iterations == 0 {
            return Err(Error::invalid("ransac iteration cap must be positive"));
        }
        Ok(())
    }

    pub fn theta_th(&self) -> f64 {
        self.theta_th_deg.to_radians()
    }

    pub fn min_group_size_for(&self, width: usize) -> usize {
        self.min_group_size
            .unwrap_or_else(|| ((30 * width) as f64 / 1024.0).round().max(3.0) as usize)
    }
}

/// A detected line: its great-circle normal and the visible arc.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreatCircleSegment {
    pub normal: UnitVec3,
    pub endpoints: [UnitVec3; 2],
    #[serde(rename = "inliers")]
    pub inlier_count: usize,
    pub pixel_length: usize,
    pub axis: Axis,
}

impl GreatCircleSegment {
    /// Segment along the shorter arc from `a` to `b`.
    pub fn from_endpoints(a: &Vec3, b: &Vec3) -> Result<Self> {
        let n = a.cross(b);
        if n.norm() < 1e-12 {
            return Err(Error::invalid("segment endpoints are parallel"));
        }
        let normal = Unit::new_normalize(n);
        Ok(GreatCircleSegment {
            normal,
            endpoints: [
                Unit::new_normalize(project_to_circle(&normal, a)),
                Unit::new_normalize(project_to_circle(&normal, b)),
            ],
            inlier_count: 0,
            pixel_length: 0,
            axis: Axis::Unclassified,
        })
    }

    pub fn with_axis(mut self, axis: Axis) -> Self {
        self.axis = axis;
        self
    }

    /// Angular length of the arc.
    pub fn arc_angle(&self) -> f64 {
        angle_between(&self.endpoints[0], &self.endpoints[1])
    }

    /// Position of `dir` along the circle, measured from the first endpoint
    /// toward the second, in `(-π, π]`.
    pub fn arc_param(&self, dir: &Vec3) -> f64 {
        let e1 = self.endpoints[0].into_inner();
        let e2 = self.oriented_normal().cross(&e1);
        dir.dot(&e2).atan2(dir.dot(&e1))
    }

    /// Normal oriented so that the arc sweeps counter-clockwise about it.
    pub fn oriented_normal(&self) -> Vec3 {
        let n = self.normal.into_inner();
        if n.dot(&self.endpoints[0].cross(&self.endpoints[1])) < 0.0 {
            -n
        } else {
            n
        }
    }

    /// Whether `dir` (on or near the circle) falls within the arc span.
    pub fn contains(&self, dir: &Vec3) -> bool {
        let t = self.arc_param(dir);
        t >= 0.0 && t <= self.arc_angle()
    }

    /// Smallest angle from `dir` to either endpoint.
    pub fn endpoint_distance(&self, dir: &Vec3) -> f64 {
        angle_between(dir, &self.endpoints[0]).min(angle_between(dir, &self.endpoints[1]))
    }

    /// Points along the arc, spaced at most `step` radians apart.
    pub fn sample(&self, step: f64) -> Vec<Vec3> {
        let total = self.arc_angle();
        let n = ((total / step).ceil() as usize).max(1);
        let e1 = self.endpoints[0].into_inner();
        let e2 = self.oriented_normal().cross(&e1);
        (0..=n)
            .map(|i| {
                let t = total * i as f64 / n as f64;
                e1 * t.cos() + e2 * t.sin()
            })
            .collect()
    }

    /// Inlier predicate used throughout: `|acos(n·r) − π/2| ≤ θ`.
    pub fn is_inlier(&self, ray: &Vec3, theta: f64) -> bool {
        angle_to_circle(&self.normal, ray) <= theta
    }
}

pub(crate) fn project_to_circle(normal: &Vec3, v: &Vec3) -> Vec3 {
    v - normal * normal.dot(v)
}

/// Output of the full line stage on one panorama.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineDetection {
    /// Every fitted segment before classification.
    pub segments: Vec<GreatCircleSegment>,
    pub basis: VanishingBasis,
    /// Segments with a Manhattan axis label.
    pub classified: Vec<GreatCircleSegment>,
}

/// Per-task rng derived from a global seed, independent of scheduling.
pub fn task_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Canny edges, seam-aware grouping, per-group circle fits, then vanishing
/// directions and Manhattan labels.
pub fn detect_lines(img: &EquirectImage, cfg: &ThresholdConfig) -> Result<LineDetection> {
    cfg.validate()?;
    let edges = detect_edges(img, cfg);
    let min_size = cfg.min_group_size_for(img.dims().cols);
    let groups = cluster_edge_groups(&edges, min_size);
    let segments = fit_groups(&groups, cfg, min_size);
    let segments = merge_collinear(segments, cfg);
    let mut rng = task_rng(cfg.seed, u64::MAX);
    let basis = estimate_vanishing_basis(&segments, cfg, &mut rng)?;
    let classified = classify_lines(&segments, &basis, cfg);
    Ok(LineDetection {
        segments,
        basis,
        classified,
    })
}

/// Fit every group independently; each group owns an rng stream.
pub fn fit_groups(
    groups: &[EdgeGroup],
    cfg: &ThresholdConfig,
    min_size: usize,
) -> Vec<GreatCircleSegment> {
    use rayon::prelude::*;
    let per_group: Vec<Vec<GreatCircleSegment>> = groups
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            let mut rng = task_rng(cfg.seed, i as u64);
            split_edge_group(g, cfg, min_size, &mut rng)
                .iter()
                .filter_map(|sub| fit_great_circle(sub, cfg, &mut rng))
                .collect()
        })
        .collect();
    per_group.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn segment_geometry() {
        let a = Vector3::new(1.0, 0.0, 0.0);
        let b = Vector3::new(0.0, 1.0, 0.0);
        let s = GreatCircleSegment::from_endpoints(&a, &b).unwrap();
        assert!((s.normal.z.abs() - 1.0).abs() < 1e-12);
        assert!((s.arc_angle() - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        let mid = Vector3::new(1.0, 1.0, 0.0).normalize();
        assert!(s.contains(&mid));
        assert!(!s.contains(&Vector3::new(1.0, -1.0, 0.0).normalize()));
        assert!((s.arc_param(&mid) - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let pts = s.sample(0.01);
        assert!(pts.iter().all(|p| s.normal.dot(p).abs() < 1e-12));
        assert!(GreatCircleSegment::from_endpoints(&a, &a).is_err());
    }

    #[test]
    fn default_group_size_scales_with_width() {
        let cfg = ThresholdConfig::default();
        assert_eq!(cfg.min_group_size_for(1024), 30);
        assert_eq!(cfg.min_group_size_for(2048), 60);
    }
}
