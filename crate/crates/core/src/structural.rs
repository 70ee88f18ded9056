//! Fusing dense network outputs with the geometric lines: edge
//! probability maps decide which lines are structural, normal maps become
//! orientation label images.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Label, LabeledImage};
use crate::geometry::{pixel_of, Dims, UnitVec3, Vec3};
use crate::lines::{GreatCircleSegment, VanishingBasis};

/// Per-pixel probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap {
    dims: Dims,
    values: Vec<f32>,
}

impl ProbabilityMap {
    pub fn new(dims: Dims, values: Vec<f32>) -> Result<Self> {
        if values.len() != dims.len() {
            return Err(Error::invalid(format!(
                "probability map needs {} values, got {}",
                dims.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::invalid(format!("probability {v} outside [0, 1]")));
        }
        Ok(ProbabilityMap { dims, values })
    }

    pub fn zeros(dims: Dims) -> Self {
        ProbabilityMap {
            dims,
            values: vec![0.0; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[self.dims.index(row, col)]
    }

    /// Nearest-neighbour resample to other panorama dims.
    pub fn resample(&self, dims: Dims) -> ProbabilityMap {
        if dims == self.dims {
            return self.clone();
        }
        let mut values = Vec::with_capacity(dims.len());
        for r in 0..dims.rows {
            let sr = ((r as f64 + 0.5) * self.dims.rows as f64 / dims.rows as f64) as usize;
            for c in 0..dims.cols {
                let sc = ((c as f64 + 0.5) * self.dims.cols as f64 / dims.cols as f64) as usize;
                values.push(self.get(sr.min(self.dims.rows - 1), sc.min(self.dims.cols - 1)));
            }
        }
        ProbabilityMap { dims, values }
    }
}

/// Per-pixel unit surface normal, or nothing where the estimate is absent.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    dims: Dims,
    normals: Vec<Option<UnitVec3>>,
}

impl NormalMap {
    pub fn new(dims: Dims, normals: Vec<Option<UnitVec3>>) -> Result<Self> {
        if normals.len() != dims.len() {
            return Err(Error::invalid(format!(
                "normal map needs {} entries, got {}",
                dims.len(),
                normals.len()
            )));
        }
        if normals
            .iter()
            .flatten()
            .any(|n| (n.norm() - 1.0).abs() > 1e-6)
        {
            return Err(Error::invalid("normal map entries must be unit length"));
        }
        Ok(NormalMap { dims, normals })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, index: usize) -> Option<UnitVec3> {
        self.normals[index]
    }

    pub fn normals(&self) -> &[Option<UnitVec3>] {
        &self.normals
    }
}

/// Tunables of the structural filter and normal labelling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    /// Probabilities below `tau` are zeroed before scoring.
    pub tau: f64,
    /// A line is kept when its score reaches this fraction of its length.
    pub score_fraction: f64,
    /// Maximum angle between a normal and a vanishing direction, degrees.
    pub normal_angle_tol_deg: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            tau: 0.2,
            score_fraction: 0.10,
            normal_angle_tol_deg: 30.0,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau) {
            return Err(Error::invalid("tau must be in [0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.score_fraction) {
            return Err(Error::invalid("score fraction must be in [0, 1]"));
        }
        if !(self.normal_angle_tol_deg > 0.0 && self.normal_angle_tol_deg <= 90.0) {
            return Err(Error::invalid("normal angle tolerance must be in (0, 90]"));
        }
        Ok(())
    }
}

pub fn threshold_probability(m: &ProbabilityMap, tau: f64) -> Result<ProbabilityMap> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [0, 1]")));
    }
    let tau = tau as f32;
    Ok(ProbabilityMap {
        dims: m.dims,
        values: m
            .values
            .iter()
            .map(|&v| if v < tau { 0.0 } else { v })
            .collect(),
    })
}

/// Pixels crossed by the arc, in walk order and without repeats. The step
/// is half a row, shrunk near the poles where columns get narrow.
pub fn rasterize_arc(seg: &GreatCircleSegment, dims: Dims) -> Vec<(usize, usize)> {
    let total = seg.arc_angle();
    if !(total > 0.0) {
        return Vec::new();
    }
    let e1 = seg.endpoints[0].into_inner();
    let e2 = seg.oriented_normal().cross(&e1);
    let base = 0.5 * dims.pixel_angle();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut t = 0.0f64;
    loop {
        let t_clamped = t.min(total);
        let v: Vec3 = e1 * t_clamped.cos() + e2 * t_clamped.sin();
        let px = pixel_of(&v, dims);
        if seen.insert(px) {
            out.push(px);
        }
        if t >= total {
            break;
        }
        let cos_el = (1.0 - v.z * v.z).max(0.0).sqrt();
        t += base * cos_el.max(0.05);
    }
    out
}

/// Sum of map values over the pixels the arc occupies, and that pixel count.
pub fn score_line(seg: &GreatCircleSegment, m: &ProbabilityMap) -> (f64, usize) {
    let pixels = rasterize_arc(seg, m.dims);
    let score = pixels.iter().map(|&(r, c)| m.get(r, c) as f64).sum();
    (score, pixels.len())
}

/// Keep the lines whose score reaches `fraction` of their pixel length.
pub fn filter_structural_lines(
    lines: &[GreatCircleSegment],
    m: &ProbabilityMap,
    fraction: f64,
) -> Vec<GreatCircleSegment> {
    use rayon::prelude::*;
    lines
        .par_iter()
        .filter(|l| score_line(l, m).0 >= fraction * l.pixel_length as f64)
        .cloned()
        .collect()
}

/// Orientation label per pixel: the axis whose vanishing direction is
/// closest to the normal (either sign), if within `angle_tol_deg`.
pub fn label_normals(nm: &NormalMap, basis: &VanishingBasis, angle_tol_deg: f64) -> LabeledImage {
    let cos_tol = angle_tol_deg.to_radians().cos();
    let vps = [basis.vp(0), basis.vp(1), basis.vp(2)];
    let labels = nm
        .normals
        .iter()
        .map(|n| {
            let Some(n) = n else { return Label::None };
            let (k, c) = vps
                .iter()
                .map(|vp| vp.dot(n).abs())
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            if c >= cos_tol {
                Label::from_axis_index(k)
            } else {
                Label::None
            }
        })
        .collect();
    LabeledImage::from_labels(nm.dims, labels).expect("dims match by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{coord_ray, RotationMatrix};
    use nalgebra::{Unit, Vector3};

    fn horizon_segment(az0: f64, az1: f64) -> GreatCircleSegment {
        let a = Vector3::new(az0.cos(), az0.sin(), 0.0);
        let b = Vector3::new(az1.cos(), az1.sin(), 0.0);
        GreatCircleSegment::from_endpoints(&a, &b).unwrap()
    }

    fn tilted_segment() -> GreatCircleSegment {
        GreatCircleSegment::from_endpoints(
            &Vector3::new(1.0, -0.6, 0.4),
            &Vector3::new(0.2, 1.0, 0.7),
        )
        .unwrap()
    }

    #[test]
    fn threshold_examples() {
        let dims = Dims::panorama(1);
        let m = ProbabilityMap::new(dims, vec![0.19, 0.21]).unwrap();
        let t = threshold_probability(&m, 0.2).unwrap();
        assert_eq!(t.values(), &[0.0, 0.21]);
        assert_eq!(threshold_probability(&t, 0.2).unwrap(), t);
        let z = ProbabilityMap::zeros(Dims::panorama(4));
        assert_eq!(threshold_probability(&z, 0.2).unwrap(), z);
        assert!(threshold_probability(&z, 1.5).is_err());
    }

    #[test]
    fn score_on_constant_maps() {
        let dims = Dims::panorama(128);
        let seg = tilted_segment();
        let ones = ProbabilityMap::new(dims, vec![1.0; dims.len()]).unwrap();
        let (s, n) = score_line(&seg, &ones);
        assert_eq!(s, n as f64);
        assert!(n > 20);
        let (s0, _) = score_line(&seg, &ProbabilityMap::zeros(dims));
        assert_eq!(s0, 0.0);
    }

    #[test]
    fn meridian_arc_of_length_50() {
        let dims = Dims::panorama(128);
        let a = coord_ray(20.0, 40.0, dims);
        let b = coord_ray(69.0, 40.0, dims);
        let seg = GreatCircleSegment::from_endpoints(&a, &b).unwrap();
        let ones = ProbabilityMap::new(dims, vec![1.0; dims.len()]).unwrap();
        assert_eq!(score_line(&seg, &ones), (50.0, 50));
    }

    #[test]
    fn band_score_matches_brute_force() {
        let dims = Dims::panorama(128);
        let seg = tilted_segment();
        // 0.8 inside the right half of the panorama, 0 elsewhere
        let values: Vec<f32> = (0..dims.len())
            .map(|i| {
                if i % dims.cols >= dims.cols / 2 {
                    0.8
                } else {
                    0.0
                }
            })
            .collect();
        let m = ProbabilityMap::new(dims, values).unwrap();
        let covered = rasterize_arc(&seg, dims)
            .iter()
            .filter(|(_, c)| *c >= dims.cols / 2)
            .count();
        assert!(covered > 0);
        let (s, _) = score_line(&seg, &m);
        assert!((s - 0.8 * covered as f64).abs() < 1e-4);
    }

    #[test]
    fn seam_crossing_arc_wraps() {
        let dims = Dims::panorama(64);
        let seg = horizon_segment(3.0, -3.0);
        let px = rasterize_arc(&seg, dims);
        assert!(px.iter().any(|p| p.1 == 0) && px.iter().any(|p| p.1 == dims.cols - 1));
        assert!(px.len() < 20);
    }

    #[test]
    fn filter_boundary() {
        let dims = Dims::panorama(128);
        let mut seg = tilted_segment();
        let n = rasterize_arc(&seg, dims).len();
        seg.pixel_length = 100;
        // score = 0.099 * n / n * 100 = 9.9 versus 10.1
        let low = ProbabilityMap::new(dims, vec![9.9 / n as f32; dims.len()]).unwrap();
        let high = ProbabilityMap::new(dims, vec![10.1 / n as f32; dims.len()]).unwrap();
        assert!(filter_structural_lines(&[seg.clone()], &low, 0.1).is_empty());
        assert_eq!(filter_structural_lines(&[seg.clone()], &high, 0.1).len(), 1);
        assert!(filter_structural_lines(&[seg], &ProbabilityMap::zeros(dims), 0.1).is_empty());
    }

    #[test]
    fn normal_labels() {
        let dims = Dims::panorama(1);
        let basis = VanishingBasis::from_rotation(RotationMatrix::from_euler_angles(0.0, 0.0, 0.4));
        let nm = NormalMap::new(dims, vec![Some(basis.vp(2)), Some(-basis.vp(0))]).unwrap();
        let l = label_normals(&nm, &basis, 30.0);
        assert_eq!(l.labels(), &[Label::Z, Label::X]);
        // about 55° from every axis
        let diagonal = Unit::new_normalize(basis.to_world(&Vector3::new(1.0, 1.0, 1.0)));
        let nm = NormalMap::new(dims, vec![Some(diagonal), None]).unwrap();
        assert_eq!(
            label_normals(&nm, &basis, 30.0).labels(),
            &[Label::None, Label::None]
        );
    }

    #[test]
    fn sign_flip_invariance() {
        let dims = Dims::panorama(8);
        let basis =
            VanishingBasis::from_rotation(RotationMatrix::from_euler_angles(0.1, -0.2, 0.3));
        let normals: Vec<_> = (0..dims.len())
            .map(|i| {
                let v = coord_ray((i / dims.cols) as f64, (i % dims.cols) as f64, dims);
                Some(Unit::new_normalize(v))
            })
            .collect();
        let flipped: Vec<_> = normals.iter().map(|n| n.map(|n| -n)).collect();
        let a = label_normals(&NormalMap::new(dims, normals).unwrap(), &basis, 30.0);
        let b = label_normals(&NormalMap::new(dims, flipped).unwrap(), &basis, 30.0);
        assert_eq!(a, b);
    }
}
