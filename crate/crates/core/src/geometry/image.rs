use serde::{Deserialize, Serialize};

use super::{coord_of, coord_ray, Dims, RotationMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Nearest,
    #[default]
    Bilinear,
}

/// Row-major, channel-interleaved equirectangular raster (`N = 2M`).
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage {
    dims: Dims,
    channels: usize,
    data: Vec<f32>,
}

impl EquirectImage {
    pub fn new(dims: Dims, channels: usize, data: Vec<f32>) -> Result<Self> {
        Dims::new(dims.rows, dims.cols)?;
        if channels == 0 {
            return Err(Error::invalid("image needs at least one channel"));
        }
        if data.len() != dims.len() * channels {
            return Err(Error::invalid(format!(
                "expected {} samples, got {}",
                dims.len() * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("image samples must be finite"));
        }
        Ok(EquirectImage {
            dims,
            channels,
            data,
        })
    }

    pub fn filled(dims: Dims, channels: usize, value: f32) -> Result<Self> {
        Self::new(dims, channels, vec![value; dims.len() * channels])
    }

    pub fn from_fn(
        dims: Dims,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.len() * channels);
        for row in 0..dims.rows {
            for col in 0..dims.cols {
                for ch in 0..channels {
                    data.push(f(row, col, ch));
                }
            }
        }
        Self::new(dims, channels, data)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize, ch: usize) -> f32 {
        self.data[(row * self.dims.cols + col) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, ch: usize, value: f32) {
        let idx = (row * self.dims.cols + col) * self.channels + ch;
        self.data[idx] = value;
    }

    /// Luma, averaging channels when there is no obvious RGB layout.
    pub fn to_gray(&self) -> EquirectImage {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|px| {
                if self.channels >= 3 {
                    0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]
                } else {
                    px.iter().sum::<f32>() / px.len() as f32
                }
            })
            .collect();
        EquirectImage {
            dims: self.dims,
            channels: 1,
            data,
        }
    }

    /// Sample at a continuous pixel position. Columns wrap around the
    /// azimuth seam, rows clamp at the poles.
    pub fn sample(&self, row: f64, col: f64, mode: Interpolation, out: &mut [f32]) {
        let rows = self.dims.rows as isize;
        match mode {
            Interpolation::Nearest => {
                let r = (row.round() as isize).clamp(0, rows - 1) as usize;
                let c = self.dims.wrap_col(col.round() as isize);
                for (ch, o) in out.iter_mut().enumerate().take(self.channels) {
                    *o = self.get(r, c, ch);
                }
            }
            Interpolation::Bilinear => {
                let r = row.clamp(0.0, (rows - 1) as f64);
                let r0 = r.floor() as isize;
                let r1 = (r0 + 1).min(rows - 1);
                let fr = (r - r0 as f64) as f32;
                let c0f = col.floor();
                let fc = (col - c0f) as f32;
                let c0 = self.dims.wrap_col(c0f as isize);
                let c1 = self.dims.wrap_col(c0f as isize + 1);
                let (r0, r1) = (r0 as usize, r1 as usize);
                for (ch, o) in out.iter_mut().enumerate().take(self.channels) {
                    let top = self.get(r0, c0, ch) * (1.0 - fc) + self.get(r0, c1, ch) * fc;
                    let bottom = self.get(r1, c0, ch) * (1.0 - fc) + self.get(r1, c1, ch) * fc;
                    *o = top * (1.0 - fr) + bottom * fr;
                }
            }
        }
    }
}

/// Re-render a panorama under a camera rotation: output pixel `p` samples
/// the input along `Rᵀ · ray(p)`.
pub fn rotate_panorama(
    img: &EquirectImage,
    rotation: &RotationMatrix,
    mode: Interpolation,
) -> EquirectImage {
    let dims = img.dims;
    let inv = rotation.inverse();
    let mut out = vec![0.0f32; img.data.len()];
    let mut px = vec![0.0f32; img.channels];
    for row in 0..dims.rows {
        for col in 0..dims.cols {
            let ray = inv * coord_ray(row as f64, col as f64, dims);
            let src = coord_of(&ray, dims);
            img.sample(src.row, src.col, mode, &mut px);
            let base = (row * dims.cols + col) * img.channels;
            out[base..base + img.channels].copy_from_slice(&px);
        }
    }
    EquirectImage {
        dims,
        channels: img.channels,
        data: out,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    fn smooth(dims: Dims) -> EquirectImage {
        EquirectImage::from_fn(dims, 1, |r, c, _| {
            let ray = coord_ray(r as f64, c as f64, dims);
            (0.5 + 0.3 * ray.x + 0.15 * ray.y * ray.z) as f32
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_aspect_and_nan() {
        assert!(EquirectImage::new(Dims { rows: 4, cols: 4 }, 1, vec![0.0; 16]).is_err());
        let mut data = vec![0.0; 32];
        data[3] = f32::NAN;
        assert!(EquirectImage::new(Dims::panorama(4), 1, data).is_err());
    }

    #[test]
    fn identity_rotation_is_exact_with_nearest() {
        let img = smooth(Dims::panorama(16));
        let out = rotate_panorama(&img, &RotationMatrix::identity(), Interpolation::Nearest);
        assert_eq!(out, img);
    }

    #[test]
    fn half_turn_about_z_shifts_columns() {
        let dims = Dims::panorama(16);
        let img = EquirectImage::from_fn(dims, 1, |r, c, _| (r * 100 + c) as f32).unwrap();
        let rot = RotationMatrix::from_axis_angle(&Vector3::z_axis(), PI);
        let out = rotate_panorama(&img, &rot, Interpolation::Nearest);
        for r in 0..dims.rows {
            for c in 0..dims.cols {
                let shifted = (c + dims.cols / 2) % dims.cols;
                assert_eq!(out.get(r, c, 0), img.get(r, shifted, 0));
            }
        }
    }

    #[test]
    fn rotation_round_trip_is_close() {
        let dims = Dims::panorama(64);
        let img = smooth(dims);
        let rot = RotationMatrix::from_euler_angles(0.3, -0.2, 1.1);
        let there = rotate_panorama(&img, &rot, Interpolation::Bilinear);
        let back = rotate_panorama(&there, &rot.inverse(), Interpolation::Bilinear);
        let mad: f32 = img
            .data()
            .iter()
            .zip(back.data())
            .map(|(a, b)| (a - b).abs())
            .sum::<f32>()
            / img.data().len() as f32;
        assert!(mad < 2.0 / 255.0, "mean abs diff {mad}");
    }

    #[test]
    fn rotation_preserves_mass() {
        let dims = Dims::panorama(64);
        let img = smooth(dims);
        let rot = RotationMatrix::from_axis_angle(&Vector3::z_axis(), 0.7);
        let out = rotate_panorama(&img, &rot, Interpolation::Bilinear);
        let a: f32 = img.data().iter().sum();
        let b: f32 = out.data().iter().sum();
        assert!((a - b).abs() / a < 0.01);
    }
}
