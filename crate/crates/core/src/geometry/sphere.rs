use std::f64::consts::PI;

use nalgebra::Unit;

use super::{UnitVec3, Vec3};
use crate::error::{Error, Result};

/// `n` nearly evenly spaced directions along the golden-section spiral:
/// `z_k = 1 − (2k + 1)/n`, azimuth `k · π(3 − √5)`.
pub fn golden_spiral_directions(n: usize) -> Result<Vec<UnitVec3>> {
    if n == 0 {
        return Err(Error::invalid("golden spiral needs at least one point"));
    }
    let golden_angle = PI * (3.0 - 5f64.sqrt());
    Ok((0..n)
        .map(|k| {
            let z = 1.0 - (2 * k + 1) as f64 / n as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let (s, c) = (k as f64 * golden_angle).sin_cos();
            Unit::new_normalize(Vec3::new(r * c, r * s, z))
        })
        .collect())
}
