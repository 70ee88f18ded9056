//! Perspective views cut from the sphere, and stitching of per-view rasters
//! back onto the panorama.
//!
//! View frames follow the usual graphics convention: `x` right, `y` up and
//! `z` pointing back toward the viewer, so the optical axis is `-z`. Per-view
//! normal rasters are expressed in this frame.

use nalgebra::{Matrix3, Unit};
use serde::{Deserialize, Serialize};

use super::{
    coord_of, coord_ray, Dims, EquirectImage, Interpolation, RotationMatrix, UnitVec3, Vec3,
};
use crate::error::{Error, Result};
use crate::structural::{NormalMap, ProbabilityMap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub center: UnitVec3,
    pub fov_deg: f64,
    pub resolution: usize,
    #[serde(default)]
    pub roll_deg: f64,
}

impl ViewSpec {
    pub const DEFAULT_FOV_DEG: f64 = 70.0;
    pub const DEFAULT_RESOLUTION: usize = 320;

    pub fn new(center: UnitVec3, fov_deg: f64, resolution: usize) -> Result<Self> {
        let view = ViewSpec {
            center,
            fov_deg,
            resolution,
            roll_deg: 0.0,
        };
        view.validate()?;
        Ok(view)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "fov {} outside (0, 180)",
                self.fov_deg
            )));
        }
        if self.resolution < 2 {
            return Err(Error::invalid("view resolution must be at least 2"));
        }
        if ((self.center.norm() - 1.0).abs()) > 1e-9 {
            return Err(Error::invalid("view centre must be a unit vector"));
        }
        Ok(())
    }

    /// Camera-to-world rotation with columns (right, up, back). "Up" is the
    /// projection of world `+z` onto the image plane, rotated by the roll.
    pub fn rotation(&self) -> RotationMatrix {
        let forward = self.center.into_inner();
        let mut up = Vec3::z() - forward * forward.z;
        if up.norm() < 1e-9 {
            up = Vec3::x() - forward * forward.x;
        }
        let up = up.normalize();
        let right = forward.cross(&up);
        let (s, c) = self.roll_deg.to_radians().sin_cos();
        let right_r = right * c + up * s;
        let up_r = up * c - right * s;
        RotationMatrix::from_matrix_unchecked(Matrix3::from_columns(&[right_r, up_r, -forward]))
    }

    fn focal_scale(&self) -> f64 {
        (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// World ray through pixel centre `(row, col)`.
    pub fn pixel_ray(&self, rotation: &RotationMatrix, row: f64, col: f64) -> Vec3 {
        let half = self.resolution as f64 / 2.0;
        let t = self.focal_scale();
        let x = (col + 0.5 - half) / half * t;
        let y = -(row + 0.5 - half) / half * t;
        rotation * Vec3::new(x, y, -1.0).normalize()
    }

    /// Continuous `(row, col)` of a world ray, if it falls inside the view.
    pub fn locate(&self, rotation: &RotationMatrix, ray: &Vec3) -> Option<(f64, f64)> {
        let cam = rotation.inverse_transform_vector(ray);
        if cam.z >= -1e-12 {
            return None;
        }
        let t = self.focal_scale();
        let half = self.resolution as f64 / 2.0;
        let x = cam.x / -cam.z;
        let y = cam.y / -cam.z;
        let col = x / t * half + half - 0.5;
        let row = -y / t * half + half - 0.5;
        let lim = self.resolution as f64 - 0.5;
        if (-0.5..=lim).contains(&row) && (-0.5..=lim).contains(&col) {
            Some((row, col))
        } else {
            None
        }
    }
}

/// Square perspective raster, row-major and channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct PerspectiveImage {
    pub resolution: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl PerspectiveImage {
    pub fn new(resolution: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != resolution * resolution * channels {
            return Err(Error::invalid("perspective raster size mismatch"));
        }
        Ok(PerspectiveImage {
            resolution,
            channels,
            data,
        })
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.data[(row * self.resolution + col) * self.channels + ch]
    }

    fn bilinear(&self, row: f64, col: f64, ch: usize) -> f32 {
        let lim = (self.resolution - 1) as f64;
        let r = row.clamp(0.0, lim);
        let c = col.clamp(0.0, lim);
        let (r0, c0) = (r.floor() as usize, c.floor() as usize);
        let (r1, c1) = (
            (r0 + 1).min(self.resolution - 1),
            (c0 + 1).min(self.resolution - 1),
        );
        let (fr, fc) = ((r - r0 as f64) as f32, (c - c0 as f64) as f32);
        let top = self.get(r0, c0, ch) * (1.0 - fc) + self.get(r0, c1, ch) * fc;
        let bottom = self.get(r1, c0, ch) * (1.0 - fc) + self.get(r1, c1, ch) * fc;
        top * (1.0 - fr) + bottom * fr
    }

    fn nearest(&self, row: f64, col: f64) -> (usize, usize) {
        let lim = self.resolution as isize - 1;
        (
            (row.round() as isize).clamp(0, lim) as usize,
            (col.round() as isize).clamp(0, lim) as usize,
        )
    }
}

/// Pinhole view of the panorama with bilinear sampling.
pub fn project_to_view(img: &EquirectImage, view: &ViewSpec) -> Result<PerspectiveImage> {
    view.validate()?;
    let rot = view.rotation();
    let res = view.resolution;
    let dims = img.dims();
    let ch = img.channels();
    let mut data = vec![0.0f32; res * res * ch];
    for row in 0..res {
        for col in 0..res {
            let ray = view.pixel_ray(&rot, row as f64, col as f64);
            let p = coord_of(&ray, dims);
            let base = (row * res + col) * ch;
            img.sample(
                p.row,
                p.col,
                Interpolation::Bilinear,
                &mut data[base..base + ch],
            );
        }
    }
    PerspectiveImage::new(res, ch, data)
}

struct PreparedView<'a> {
    spec: &'a ViewSpec,
    rotation: RotationMatrix,
    min_cos: f64,
}

fn prepare<'a>(views: impl Iterator<Item = &'a ViewSpec>) -> Result<Vec<PreparedView<'a>>> {
    views
        .map(|spec| {
            spec.validate()?;
            let half = (spec.fov_deg.to_radians() / 2.0).tan();
            let corner = (1.0 + 2.0 * half * half).sqrt();
            Ok(PreparedView {
                spec,
                rotation: spec.rotation(),
                min_cos: 1.0 / corner - 1e-9,
            })
        })
        .collect()
}

/// Per-pixel maximum over all views covering the pixel; uncovered pixels
/// stay at zero.
pub fn stitch_max(views: &[(ViewSpec, PerspectiveImage)], dims: Dims) -> Result<ProbabilityMap> {
    if views.is_empty() {
        return Err(Error::invalid("stitch_max needs at least one view"));
    }
    for (spec, raster) in views {
        if raster.resolution != spec.resolution || raster.channels != 1 {
            return Err(Error::invalid(
                "probability view raster must be single-channel at view resolution",
            ));
        }
        if raster.data.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("probability views must lie in [0, 1]"));
        }
    }
    let prepared = prepare(views.iter().map(|(s, _)| s))?;
    let mut out = vec![0.0f32; dims.len()];
    for row in 0..dims.rows {
        for col in 0..dims.cols {
            let ray = coord_ray(row as f64, col as f64, dims);
            let mut best = 0.0f32;
            for (pv, (_, raster)) in prepared.iter().zip(views) {
                if ray.dot(&pv.spec.center) < pv.min_cos {
                    continue;
                }
                if let Some((r, c)) = pv.spec.locate(&pv.rotation, &ray) {
                    best = best.max(raster.bilinear(r, c, 0));
                }
            }
            out[dims.index(row, col)] = best;
        }
    }
    ProbabilityMap::new(dims, out)
}

/// Number of views covering each panorama pixel.
pub fn view_coverage(views: &[ViewSpec], dims: Dims) -> Result<Vec<u32>> {
    let prepared = prepare(views.iter())?;
    let mut out = vec![0u32; dims.len()];
    for row in 0..dims.rows {
        for col in 0..dims.cols {
            let ray = coord_ray(row as f64, col as f64, dims);
            out[dims.index(row, col)] = prepared
                .iter()
                .filter(|pv| ray.dot(&pv.spec.center) >= pv.min_cos)
                .filter(|pv| pv.spec.locate(&pv.rotation, &ray).is_some())
                .count() as u32;
        }
    }
    Ok(out)
}

/// Rotate per-view normals into the world frame and average overlaps.
/// A zero vector in a view raster means "no estimate" for that pixel.
pub fn stitch_avg_normals(views: &[(ViewSpec, PerspectiveImage)], dims: Dims) -> Result<NormalMap> {
    if views.is_empty() {
        return Err(Error::invalid("stitch_avg_normals needs at least one view"));
    }
    for (spec, raster) in views {
        if raster.resolution != spec.resolution || raster.channels != 3 {
            return Err(Error::invalid(
                "normal view raster must have 3 channels at view resolution",
            ));
        }
    }
    let prepared = prepare(views.iter().map(|(s, _)| s))?;
    let mut out = Vec::with_capacity(dims.len());
    for row in 0..dims.rows {
        for col in 0..dims.cols {
            let ray = coord_ray(row as f64, col as f64, dims);
            let mut sum = Vec3::zeros();
            let mut hits = 0usize;
            for (pv, (_, raster)) in prepared.iter().zip(views) {
                if ray.dot(&pv.spec.center) < pv.min_cos {
                    continue;
                }
                let Some((r, c)) = pv.spec.locate(&pv.rotation, &ray) else {
                    continue;
                };
                let (r, c) = raster.nearest(r, c);
                let local = Vec3::new(
                    raster.get(r, c, 0) as f64,
                    raster.get(r, c, 1) as f64,
                    raster.get(r, c, 2) as f64,
                );
                let n = local.norm();
                if n < 1e-6 {
                    continue;
                }
                sum += pv.rotation * (local / n);
                hits += 1;
            }
            out.push(if hits > 0 && sum.norm() > 1e-9 {
                Some(Unit::new_normalize(sum))
            } else {
                None
            });
        }
    }
    NormalMap::new(dims, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angle_between, golden_spiral_directions};
    use nalgebra::Vector3;

    fn constant_view(spec: ViewSpec, value: f32) -> (ViewSpec, PerspectiveImage) {
        let n = spec.resolution * spec.resolution;
        (
            spec,
            PerspectiveImage::new(spec.resolution, 1, vec![value; n]).unwrap(),
        )
    }

    #[test]
    fn view_spec_validation() {
        assert!(ViewSpec::new(Vector3::x_axis(), 0.0, 64).is_err());
        assert!(ViewSpec::new(Vector3::x_axis(), 180.0, 64).is_err());
        assert!(ViewSpec::new(Vector3::x_axis(), 70.0, 1).is_err());
        assert!(ViewSpec::new(Vector3::x_axis(), 70.0, 2).is_ok());
    }

    #[test]
    fn view_rotation_is_proper_and_upright() {
        for c in golden_spiral_directions(60).unwrap() {
            let v = ViewSpec::new(c, 70.0, 32).unwrap();
            let r = v.rotation();
            assert!(crate::geometry::is_rotation(r.matrix(), 1e-9));
            let up = r.matrix().column(1).into_owned();
            assert!(up.z >= -1e-12);
        }
    }

    #[test]
    fn constant_panorama_gives_constant_view() {
        let img = EquirectImage::filled(Dims::panorama(32), 1, 0.42).unwrap();
        let view =
            ViewSpec::new(Unit::new_normalize(Vector3::new(0.3, -0.5, 0.4)), 70.0, 24).unwrap();
        let p = project_to_view(&img, &view).unwrap();
        assert!(p.data.iter().all(|v| (v - 0.42).abs() < 1e-6));
    }

    #[test]
    fn view_centre_samples_forward_direction() {
        let dims = Dims::panorama(64);
        let img = EquirectImage::from_fn(dims, 1, |r, c, _| (r * dims.cols + c) as f32).unwrap();
        let view = ViewSpec::new(Vector3::x_axis(), 90.0, 3).unwrap();
        let p = project_to_view(&img, &view).unwrap();
        // (1,0,0) sits between the four centre pixels of a 64x128 panorama
        let expected = 0.25
            * (img.get(31, 63, 0) + img.get(31, 64, 0) + img.get(32, 63, 0) + img.get(32, 64, 0));
        assert!((p.get(1, 1, 0) - expected).abs() < 1e-3);
        let rot = view.rotation();
        let centre = view.pixel_ray(&rot, 1.0, 1.0);
        assert!(angle_between(&centre, &Vector3::x()) < 1e-12);
    }

    #[test]
    fn great_circle_projects_to_straight_line() {
        // Render a thin arc of the great circle with normal n, then check the
        // projected centre line is straight in a pinhole view.
        let n = Vector3::new(0.2, -0.3, 0.93).normalize();
        let dims = Dims::panorama(512);
        let img = EquirectImage::from_fn(dims, 1, |r, c, _| {
            let ray = coord_ray(r as f64, c as f64, dims);
            let d = crate::geometry::angle_to_circle(&n, &ray) / dims.pixel_angle();
            (1.0 - d).max(0.0) as f32
        })
        .unwrap();
        let view =
            ViewSpec::new(Unit::new_normalize(Vector3::new(1.0, 0.2, 0.1)), 70.0, 160).unwrap();
        let p = project_to_view(&img, &view).unwrap();
        // Weighted centroid of the line along each column.
        let mut pts = Vec::new();
        for col in 10..150 {
            let (mut w, mut s) = (0.0f64, 0.0f64);
            for row in 0..160 {
                let v = p.get(row, col, 0) as f64;
                w += v;
                s += v * row as f64;
            }
            if w > 0.5 {
                pts.push((col as f64, s / w));
            }
        }
        assert!(pts.len() > 50);
        let k = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let slope = sxy / sxx;
        let max_dev = pts
            .iter()
            .map(|p| (p.1 - (my + slope * (p.0 - mx))).abs())
            .fold(0.0, f64::max);
        assert!(max_dev < 0.5, "max deviation {max_dev}");
    }

    #[test]
    fn stitch_max_single_and_overlap() {
        let dims = Dims::panorama(32);
        let a = ViewSpec::new(Vector3::x_axis(), 70.0, 16).unwrap();
        let out = stitch_max(&[constant_view(a, 0.7)], dims).unwrap();
        let cov = view_coverage(&[a], dims).unwrap();
        for (v, c) in out.values().iter().zip(&cov) {
            if *c > 0 {
                assert!((v - 0.7).abs() < 1e-6);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
        let b = ViewSpec::new(Unit::new_normalize(Vector3::new(1.0, 0.3, 0.0)), 70.0, 16).unwrap();
        let both = stitch_max(&[constant_view(a, 0.3), constant_view(b, 0.9)], dims).unwrap();
        let cov_b = view_coverage(&[b], dims).unwrap();
        for i in 0..dims.len() {
            if cov[i] > 0 && cov_b[i] > 0 {
                assert!((both.values()[i] - 0.9).abs() < 1e-6);
            }
        }
        assert!(stitch_max(&[], dims).is_err());
    }

    #[test]
    fn stitch_max_is_order_independent() {
        let dims = Dims::panorama(24);
        let views: Vec<_> = golden_spiral_directions(8)
            .unwrap()
            .into_iter()
            .enumerate()
            .map(|(i, c)| constant_view(ViewSpec::new(c, 70.0, 12).unwrap(), 0.1 * i as f32))
            .collect();
        let forward = stitch_max(&views, dims).unwrap();
        let mut rev = views.clone();
        rev.reverse();
        assert_eq!(forward, stitch_max(&rev, dims).unwrap());
    }

    #[test]
    fn golden_spiral_views_cover_everything() {
        let dims = Dims::panorama(128);
        let views: Vec<_> = golden_spiral_directions(60)
            .unwrap()
            .into_iter()
            .map(|c| ViewSpec::new(c, 70.0, 32).unwrap())
            .collect();
        let cov = view_coverage(&views, dims).unwrap();
        assert!(cov.iter().all(|&c| c > 0));
    }

    fn normal_view(spec: ViewSpec, world_normal: Vec3) -> (ViewSpec, PerspectiveImage) {
        let local = spec.rotation().inverse() * world_normal;
        let n = spec.resolution * spec.resolution;
        let data = (0..n)
            .flat_map(|_| [local.x as f32, local.y as f32, local.z as f32])
            .collect();
        (
            spec,
            PerspectiveImage::new(spec.resolution, 3, data).unwrap(),
        )
    }

    #[test]
    fn averaged_normals() {
        let dims = Dims::panorama(32);
        let a = ViewSpec::new(Vector3::x_axis(), 70.0, 16).unwrap();
        let b = ViewSpec::new(Unit::new_normalize(Vector3::new(1.0, 0.2, 0.1)), 70.0, 16).unwrap();
        let target = Vector3::new(0.0, 0.6, 0.8);

        let single = stitch_avg_normals(&[normal_view(a, target)], dims).unwrap();
        let centre = dims.index(dims.rows / 2, dims.cols / 2);
        assert!(angle_between(&single.get(centre).unwrap(), &target) < 1e-6);
        assert!(single.get(0).is_none());

        let same =
            stitch_avg_normals(&[normal_view(a, target), normal_view(b, target)], dims).unwrap();
        assert!(angle_between(&same.get(centre).unwrap(), &target) < 1e-6);

        let tilt = RotationMatrix::from_axis_angle(&Vector3::x_axis(), 10f64.to_radians());
        let other = tilt * target;
        let mixed =
            stitch_avg_normals(&[normal_view(a, target), normal_view(b, other)], dims).unwrap();
        let bisector = (target + other).normalize();
        let got = mixed.get(centre).unwrap();
        assert!(angle_between(&got, &bisector) < 1e-6);
        assert!((angle_between(&got, &target) - 5f64.to_radians()).abs() < 1e-6);
    }
}
