//! Spherical conventions shared by every stage.
//!
//! The camera sits at the origin with `+z` pointing up (gravity is `-z`).
//! Row 0 of an equirectangular panorama is the `+z` pole and azimuth grows
//! with the column index:
//!
//! ```text
//! azimuth   = 2π (col + 0.5) / N − π
//! elevation = π/2 − π (row + 0.5) / M
//! ray       = (cos e · cos a, cos e · sin a, sin e)
//! ```
//!
//! Pixel coordinates are continuous and index-centred: integer values name
//! pixel centres, so a full image spans `[-0.5, M - 0.5] × [-0.5, N - 0.5]`.

mod image;
mod sphere;
mod views;

pub use self::image::{rotate_panorama, EquirectImage, Interpolation};
pub use self::sphere::golden_spiral_directions;
pub use self::views::{
    project_to_view, stitch_avg_normals, stitch_max, view_coverage, PerspectiveImage, ViewSpec,
};

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;
/// A direction on the unit sphere (rays, line normals, corners, VPs).
pub type UnitVec3 = Unit<Vector3<f64>>;
/// Proper rotation, `RᵀR = I` and `det R = +1`.
pub type RotationMatrix = Rotation3<f64>;

/// Raster dimensions: `rows` (M) by `cols` (N).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub rows: usize,
    pub cols: usize,
}

impl Dims {
    /// Equirectangular dimensions (`cols = 2 · rows`).
    pub fn panorama(rows: usize) -> Self {
        Dims {
            rows,
            cols: 2 * rows,
        }
    }

    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols != 2 * rows {
            return Err(Error::invalid(format!(
                "panorama dims must satisfy N = 2M > 0, got {rows}x{cols}"
            )));
        }
        Ok(Dims { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Angular size of one row (equal to one column at the equator).
    pub fn pixel_angle(&self) -> f64 {
        PI / self.rows as f64
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn wrap_col(&self, col: isize) -> usize {
        col.rem_euclid(self.cols as isize) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub row: f64,
    pub col: f64,
}

impl PixelCoord {
    pub fn new(row: f64, col: f64) -> Self {
        PixelCoord { row, col }
    }
}

/// Azimuth and elevation of a ray (no normalization required).
#[inline]
pub fn ray_angles(v: &Vec3) -> (f64, f64) {
    let horiz = (v.x * v.x + v.y * v.y).sqrt();
    (v.y.atan2(v.x), v.z.atan2(horiz))
}

#[inline]
pub fn angles_to_ray(azimuth: f64, elevation: f64) -> Vec3 {
    let (se, ce) = elevation.sin_cos();
    let (sa, ca) = azimuth.sin_cos();
    Vec3::new(ce * ca, ce * sa, se)
}

/// Ray through a continuous pixel position.
pub fn pixel_to_ray(p: PixelCoord, dims: Dims) -> Result<UnitVec3> {
    let in_rows = p.row >= -0.5 && p.row <= dims.rows as f64 - 0.5;
    let in_cols = p.col >= -0.5 && p.col <= dims.cols as f64 - 0.5;
    if !(in_rows && in_cols) {
        return Err(Error::invalid(format!(
            "pixel ({}, {}) outside {}x{} panorama",
            p.row, p.col, dims.rows, dims.cols
        )));
    }
    Ok(Unit::new_unchecked(coord_ray(p.row, p.col, dims)))
}

/// Unchecked hot-loop variant of [`pixel_to_ray`].
#[inline]
pub fn coord_ray(row: f64, col: f64, dims: Dims) -> Vec3 {
    let azimuth = TAU * (col + 0.5) / dims.cols as f64 - PI;
    let elevation = FRAC_PI_2 - PI * (row + 0.5) / dims.rows as f64;
    angles_to_ray(azimuth, elevation)
}

/// Continuous pixel position of a ray. Exact poles get column 0.
pub fn ray_to_pixel(v: &Vec3, dims: Dims) -> Result<PixelCoord> {
    let norm = v.norm();
    if !(norm > 1e-12) || !norm.is_finite() {
        return Err(Error::invalid("cannot project a zero or non-finite ray"));
    }
    Ok(coord_of(v, dims))
}

/// Unchecked variant of [`ray_to_pixel`]; `v` must be non-zero.
#[inline]
pub fn coord_of(v: &Vec3, dims: Dims) -> PixelCoord {
    let (azimuth, elevation) = ray_angles(v);
    let row = (FRAC_PI_2 - elevation) * dims.rows as f64 / PI - 0.5;
    if v.x == 0.0 && v.y == 0.0 {
        return PixelCoord { row, col: 0.0 };
    }
    let mut col = (azimuth + PI) * dims.cols as f64 / TAU - 0.5;
    // atan2 returns +π on the seam; fold it onto the left edge
    if col > dims.cols as f64 - 0.5 {
        col -= dims.cols as f64;
    }
    PixelCoord { row, col }
}

/// Integer pixel containing a ray (rows clamped, columns wrapped).
#[inline]
pub fn pixel_of(v: &Vec3, dims: Dims) -> (usize, usize) {
    let p = coord_of(v, dims);
    let row = (p.row + 0.5).floor().clamp(0.0, dims.rows as f64 - 1.0) as usize;
    let col = dims.wrap_col((p.col + 0.5).floor() as isize);
    (row, col)
}

/// Angle between two directions, stable near 0 and π.
#[inline]
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Angular distance of a ray from the great circle with unit normal `n`,
/// i.e. `|acos(n·r) − π/2|` for unit `r`.
#[inline]
pub fn angle_to_circle(n: &Vec3, r: &Vec3) -> f64 {
    n.dot(r).abs().min(1.0).asin()
}

/// Projection onto SO(3) closest in Frobenius norm.
pub fn nearest_rotation(m: &Matrix3<f64>) -> RotationMatrix {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut d = Matrix3::identity();
        d[(2, 2)] = -1.0;
        r = u * d * v_t;
    }
    Rotation3::from_matrix_unchecked(r)
}

/// Checks `RᵀR = I` and `det R = +1` within `tol`.
pub fn is_rotation(m: &Matrix3<f64>, tol: f64) -> bool {
    let err = (m.transpose() * m - Matrix3::identity()).amax();
    err <= tol && (m.determinant() - 1.0).abs() <= tol
}

/// Pre-computed pixel-centre rays for a raster size.
#[derive(Debug, Clone)]
pub struct RayGrid {
    pub dims: Dims,
    rays: Vec<Vec3>,
}

impl RayGrid {
    pub fn new(dims: Dims) -> Self {
        let mut rays = Vec::with_capacity(dims.len());
        for row in 0..dims.rows {
            for col in 0..dims.cols {
                rays.push(coord_ray(row as f64, col as f64, dims));
            }
        }
        RayGrid { dims, rays }
    }

    pub fn rays(&self) -> &[Vec3] {
        &self.rays
    }

    #[inline]
    pub fn ray(&self, row: usize, col: usize) -> &Vec3 {
        &self.rays[self.dims.index(row, col)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn center_pixel_is_forward() {
        let dims = Dims::panorama(8);
        let r = pixel_to_ray(PixelCoord::new(3.5, 7.5), dims).unwrap();
        assert_abs_diff_eq!(r.x, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn corner_pixel_of_tiny_panorama() {
        let dims = Dims::panorama(2);
        let r = pixel_to_ray(PixelCoord::new(0.0, 0.0), dims).unwrap();
        assert_abs_diff_eq!(r.x, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.y, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.z, std::f64::consts::FRAC_1_SQRT_2, epsilon = 1e-12);
    }

    #[test]
    fn out_of_bounds_pixel_is_rejected() {
        let dims = Dims::panorama(4);
        assert!(pixel_to_ray(PixelCoord::new(4.0, 0.0), dims).is_err());
        assert!(pixel_to_ray(PixelCoord::new(0.0, -1.0), dims).is_err());
    }

    #[test]
    fn every_pixel_round_trips() {
        let dims = Dims::panorama(8);
        for row in 0..dims.rows {
            for col in 0..dims.cols {
                let p = PixelCoord::new(row as f64, col as f64);
                let r = pixel_to_ray(p, dims).unwrap();
                let q = ray_to_pixel(&r, dims).unwrap();
                assert_abs_diff_eq!(q.row, p.row, epsilon = 1e-9);
                assert_abs_diff_eq!(q.col, p.col, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn poles_and_zero_vector() {
        let dims = Dims::panorama(16);
        let p = ray_to_pixel(&Vec3::z(), dims).unwrap();
        assert_eq!(p.col, 0.0);
        assert!(p.row >= -0.5 && p.row < 0.5);
        assert_eq!(pixel_of(&Vec3::z(), dims).0, 0);
        assert_eq!(pixel_of(&-Vec3::z(), dims).0, 15);
        let c = ray_to_pixel(&Vec3::x(), dims).unwrap();
        assert_abs_diff_eq!(c.row, 7.5, epsilon = 1e-12);
        assert_abs_diff_eq!(c.col, 15.5, epsilon = 1e-12);
        assert!(ray_to_pixel(&Vec3::zeros(), dims).is_err());
    }

    #[test]
    fn nearest_rotation_fixes_reflections() {
        let m = Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, -1.0);
        let r = nearest_rotation(&m);
        assert!(is_rotation(r.matrix(), 1e-12));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn random_rays_round_trip(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0) {
            let v = Vec3::new(x, y, z);
            prop_assume!(v.norm() > 1e-3);
            let v = v.normalize();
            let dims = Dims::panorama(512);
            let p = ray_to_pixel(&v, dims).unwrap();
            let back = pixel_to_ray(p, dims).unwrap();
            prop_assert!(angle_between(&v, &back) < 1e-6);
        }
    }
}
