//! Canny edge detection on an equirectangular image. Every neighbourhood
//! operation wraps around the azimuth seam and clamps at the poles.

use std::collections::VecDeque;

use super::ThresholdConfig;
use crate::geometry::{Dims, EquirectImage};

/// Binary edge raster with a sub-pixel offset per edge pixel.
#[derive(Debug, Clone)]
pub struct EdgeMap {
    pub dims: Dims,
    pub mask: Vec<bool>,
    /// `(d_row, d_col)` from the pixel centre to the refined edge location.
    pub offsets: Vec<(f32, f32)>,
}

impl EdgeMap {
    pub fn empty(dims: Dims) -> Self {
        EdgeMap {
            dims,
            mask: vec![false; dims.len()],
            offsets: vec![(0.0, 0.0); dims.len()],
        }
    }

    #[inline]
    pub fn is_edge(&self, row: usize, col: usize) -> bool {
        self.mask[self.dims.index(row, col)]
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f32> {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f32> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp() as f32)
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

fn blur(src: &[f32], dims: Dims, sigma: f64) -> Vec<f32> {
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as isize;
    let (rows, cols) = (dims.rows as isize, dims.cols as isize);
    let mut tmp = vec![0.0f32; src.len()];
    for r in 0..rows {
        let row = &src[(r * cols) as usize..((r + 1) * cols) as usize];
        for c in 0..cols {
            let mut acc = 0.0;
            for (i, w) in k.iter().enumerate() {
                let cc = (c + i as isize - radius).rem_euclid(cols) as usize;
                acc += w * row[cc];
            }
            tmp[(r * cols + c) as usize] = acc;
        }
    }
    let mut out = vec![0.0f32; src.len()];
    for r in 0..rows {
        for c in 0..cols {
            let mut acc = 0.0;
            for (i, w) in k.iter().enumerate() {
                let rr = (r + i as isize - radius).clamp(0, rows - 1);
                acc += w * tmp[(rr * cols + c) as usize];
            }
            out[(r * cols + c) as usize] = acc;
        }
    }
    out
}

/// Seam-aware Canny: Gaussian blur, Sobel gradients, non-maximum
/// suppression with parabolic sub-pixel refinement, then hysteresis with
/// thresholds relative to the strongest gradient.
pub fn detect_edges(img: &EquirectImage, cfg: &ThresholdConfig) -> EdgeMap {
    let gray = img.to_gray();
    let dims = gray.dims();
    let smooth = blur(gray.data(), dims, cfg.canny_sigma);
    let (rows, cols) = (dims.rows as isize, dims.cols as isize);
    let at = |r: isize, c: isize| -> f32 {
        let r = r.clamp(0, rows - 1);
        let c = c.rem_euclid(cols);
        smooth[(r * cols + c) as usize]
    };

    let mut gx = vec![0.0f32; dims.len()];
    let mut gy = vec![0.0f32; dims.len()];
    let mut mag = vec![0.0f32; dims.len()];
    let mut max_mag = 0.0f32;
    for r in 0..rows {
        for c in 0..cols {
            let dx = (at(r - 1, c + 1) + 2.0 * at(r, c + 1) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r, c - 1) + at(r + 1, c - 1));
            let dy = (at(r + 1, c - 1) + 2.0 * at(r + 1, c) + at(r + 1, c + 1))
                - (at(r - 1, c - 1) + 2.0 * at(r - 1, c) + at(r - 1, c + 1));
            let i = (r * cols + c) as usize;
            gx[i] = dx;
            gy[i] = dy;
            mag[i] = dx.hypot(dy);
            max_mag = max_mag.max(mag[i]);
        }
    }
    let mut edges = EdgeMap::empty(dims);
    if max_mag <= 1e-6 {
        return edges;
    }
    let low = cfg.canny_low as f32 * max_mag;
    let high = cfg.canny_high as f32 * max_mag;
    let m_at = |r: isize, c: isize| -> f32 {
        if r < 0 || r >= rows {
            return 0.0;
        }
        mag[(r * cols + c.rem_euclid(cols)) as usize]
    };

    // 0: weak, 1: strong, otherwise not a candidate.
    let mut class = vec![u8::MAX; dims.len()];
    for r in 0..rows {
        for c in 0..cols {
            let i = (r * cols + c) as usize;
            let m = mag[i];
            if m < low || m <= 0.0 {
                continue;
            }
            let angle = gy[i].atan2(gx[i]).to_degrees();
            let a = if angle < 0.0 { angle + 180.0 } else { angle };
            // Step along the gradient direction in (row, col).
            let (dr, dc): (isize, isize) = if !(22.5..157.5).contains(&a) {
                (0, 1)
            } else if a < 67.5 {
                (1, 1)
            } else if a < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let ahead = m_at(r + dr, c + dc);
            let behind = m_at(r - dr, c - dc);
            if !(m > ahead && m >= behind) {
                continue;
            }
            let denom = ahead - 2.0 * m + behind;
            let t = if denom.abs() > 1e-12 {
                (0.5 * (behind - ahead) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            edges.offsets[i] = (t * dr as f32, t * dc as f32);
            class[i] = if m >= high { 1 } else { 0 };
        }
    }

    let mut queue = VecDeque::new();
    for (i, &k) in class.iter().enumerate() {
        if k == 1 {
            edges.mask[i] = true;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (r, c) = ((i / dims.cols) as isize, (i % dims.cols) as isize);
        for dr in -1..=1 {
            for dc in -1..=1 {
                let rr = r + dr;
                if rr < 0 || rr >= rows || (dr == 0 && dc == 0) {
                    continue;
                }
                let j = (rr * cols + (c + dc).rem_euclid(cols)) as usize;
                if class[j] == 0 && !edges.mask[j] {
                    edges.mask[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    for (i, on) in edges.mask.iter().enumerate() {
        if !on {
            edges.offsets[i] = (0.0, 0.0);
        }
    }
    edges
}
