use nalgebra::{Matrix3, Unit};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fit::least_squares_normal;
use super::{GreatCircleSegment, ThresholdConfig};
use crate::error::{Error, Result};
use crate::geometry::{angle_to_circle, nearest_rotation, RotationMatrix, UnitVec3, Vec3};

const MAX_PAIRS: usize = 2000;
const TOP_CANDIDATES: usize = 40;

/// Manhattan frame: columns of `rotation` are `vp_x`, `vp_y`, `vp_z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanishingBasis {
    pub rotation: RotationMatrix,
    /// Lines passing through each vanishing direction.
    pub inliers: [usize; 3],
}

impl VanishingBasis {
    pub fn identity() -> Self {
        VanishingBasis {
            rotation: RotationMatrix::identity(),
            inliers: [0; 3],
        }
    }

    pub fn from_rotation(rotation: RotationMatrix) -> Self {
        VanishingBasis {
            rotation,
            inliers: [0; 3],
        }
    }

    pub fn vp(&self, k: usize) -> UnitVec3 {
        Unit::new_unchecked(self.rotation.matrix().column(k).into_owned())
    }

    /// Express a world direction in the basis frame.
    pub fn to_local(&self, v: &Vec3) -> Vec3 {
        self.rotation.inverse() * v
    }

    pub fn to_world(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }
}

fn sign_free_angle(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b).abs().min(1.0).acos()
}

fn count_through(lines: &[GreatCircleSegment], vp: &Vec3, theta: f64) -> usize {
    lines
        .iter()
        .filter(|l| angle_to_circle(&l.normal, vp) <= theta)
        .count()
}

/// Least-squares direction common to the lines through `vp`.
fn refine(lines: &[GreatCircleSegment], vp: &Vec3, theta: f64) -> Vec3 {
    let members: Vec<&GreatCircleSegment> = lines
        .iter()
        .filter(|l| angle_to_circle(&l.normal, vp) <= theta)
        .collect();
    if members.len() < 2 {
        return *vp;
    }
    let normals: Vec<Vec3> = members.iter().map(|l| l.normal.into_inner()).collect();
    match least_squares_normal(normals.iter().map(|n| (n, 1.0))) {
        Some(v) if v.dot(vp) < 0.0 => -v,
        Some(v) => v,
        None => *vp,
    }
}

/// Flip and order the columns: the most vertical becomes `vp_z` (pointing
/// up), the remaining column with the largest `|x|` becomes `vp_x`
/// (pointing to `+x`), and `vp_y = vp_z × vp_x`.
fn canonicalize(m: &Matrix3<f64>) -> Matrix3<f64> {
    let cols: Vec<Vec3> = (0..3).map(|k| m.column(k).into_owned()).collect();
    let zi = (0..3)
        .max_by(|&a, &b| cols[a].z.abs().total_cmp(&cols[b].z.abs()))
        .unwrap();
    let mut z = cols[zi];
    if z.z < 0.0 {
        z = -z;
    }
    let rest: Vec<usize> = (0..3).filter(|&k| k != zi).collect();
    let xi = if cols[rest[0]].x.abs() >= cols[rest[1]].x.abs() {
        rest[0]
    } else {
        rest[1]
    };
    let mut x = cols[xi];
    if x.x < 0.0 {
        x = -x;
    }
    let y = z.cross(&x);
    Matrix3::from_columns(&[x, y, z])
}

/// Vanishing directions from pairwise intersections of line normals:
/// candidates `n_a × n_b` are scored by how many great circles pass
/// through them, and the best mutually orthogonal pair (completed by its
/// cross product) wins.
pub fn estimate_vanishing_basis(
    lines: &[GreatCircleSegment],
    cfg: &ThresholdConfig,
    rng: &mut impl Rng,
) -> Result<VanishingBasis> {
    if lines.len() < 4 {
        return Err(Error::Estimation(format!(
            "vanishing points need at least 4 lines, got {}",
            lines.len()
        )));
    }
    let theta = cfg.theta_th();
    let ortho = cfg.vp_orthogonality_deg.to_radians();
    let n = lines.len();
    let total_pairs = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total_pairs <= MAX_PAIRS {
        (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .collect()
    } else {
        (0..MAX_PAIRS)
            .map(|_| {
                let a = rng.random_range(0..n);
                let mut b = rng.random_range(0..n - 1);
                if b >= a {
                    b += 1;
                }
                (a.min(b), a.max(b))
            })
            .collect()
    };

    let mut scored: Vec<(Vec3, usize)> = pairs
        .iter()
        .filter_map(|&(a, b)| {
            let v = lines[a].normal.cross(&lines[b].normal);
            (v.norm() > 1e-6).then(|| {
                let v = v.normalize();
                (v, count_through(lines, &v, theta))
            })
        })
        .collect();
    scored.sort_by_key(|s| std::cmp::Reverse(s.1));

    let mut top: Vec<(Vec3, usize)> = Vec::new();
    for (v, _) in scored {
        if top.len() >= TOP_CANDIDATES {
            break;
        }
        let v = refine(lines, &v, theta);
        if top
            .iter()
            .any(|(u, _)| sign_free_angle(u, &v) < 2.0 * theta)
        {
            continue;
        }
        top.push((v, count_through(lines, &v, theta)));
    }

    let mut best: Option<(Matrix3<f64>, usize)> = None;
    for i in 0..top.len() {
        for j in i + 1..top.len() {
            let (a, b) = (&top[i].0, &top[j].0);
            let off = (a.dot(b).abs().min(1.0).asin()).abs();
            if off > ortho {
                continue;
            }
            let c = a.cross(b).normalize();
            let total = top[i].1 + top[j].1 + count_through(lines, &c, theta);
            if best.as_ref().is_none_or(|(_, t)| total > *t) {
                best = Some((Matrix3::from_columns(&[*a, *b, c]), total));
            }
        }
    }
    let (mut m, _) = best.ok_or_else(|| {
        Error::Estimation("no pair of orthogonal vanishing directions found".into())
    })?;

    for _ in 0..2 {
        let r = nearest_rotation(&m);
        let cols: Vec<Vec3> = (0..3)
            .map(|k| refine(lines, &r.matrix().column(k).into_owned(), theta))
            .collect();
        m = Matrix3::from_columns(&cols);
    }
    let r = nearest_rotation(&canonicalize(&nearest_rotation(&m).into_inner()));
    let canon = canonicalize(r.matrix());
    let rotation = RotationMatrix::from_matrix_unchecked(canon);
    let inliers = [0, 1, 2].map(|k| count_through(lines, &canon.column(k).into_owned(), theta));
    Ok(VanishingBasis { rotation, inliers })
}

/// Angle between two Manhattan frames, minimised over the 24 proper
/// signed permutations of the second frame's axes.
pub fn basis_angle_error(a: &RotationMatrix, b: &RotationMatrix) -> f64 {
    let mut best = f64::INFINITY;
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for p in perms {
        for signs in 0..8u8 {
            let mut pm = Matrix3::zeros();
            for (col, &row) in p.iter().enumerate() {
                pm[(row, col)] = if signs >> col & 1 == 1 { -1.0 } else { 1.0 };
            }
            if pm.determinant() < 0.0 {
                continue;
            }
            let q = a.matrix().transpose() * b.matrix() * pm;
            let c = ((q.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
            best = best.min(c.acos());
        }
    }
    best
}
