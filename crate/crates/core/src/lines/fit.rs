use nalgebra::{Matrix3, Unit};
use rand::Rng;

use super::groups::EdgeGroup;
use super::{project_to_circle, Axis, GreatCircleSegment, ThresholdConfig};
use crate::geometry::{angle_to_circle, Vec3};

/// Smallest eigenvector of `Σ w v vᵀ`: the plane normal that best fits
/// the given directions.
pub(crate) fn least_squares_normal<'a>(
    dirs: impl Iterator<Item = (&'a Vec3, f64)>,
) -> Option<Vec3> {
    let mut m = Matrix3::zeros();
    for (v, w) in dirs {
        m += v * v.transpose() * w;
    }
    let eig = m.symmetric_eigen();
    let (k, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let n = eig.eigenvectors.column(k).into_owned();
    (n.norm() > 0.5).then(|| n.normalize())
}

fn inliers_of(rays: &[Vec3], n: &Vec3, theta: f64) -> Vec<usize> {
    (0..rays.len())
        .filter(|&i| angle_to_circle(n, &rays[i]) <= theta)
        .collect()
}

/// RANSAC over ray pairs with an adaptive iteration count. Returns the
/// consensus normal and the indices of its inliers.
pub fn ransac_great_circle(
    rays: &[Vec3],
    cfg: &ThresholdConfig,
    rng: &mut impl Rng,
) -> Option<(Vec3, Vec<usize>)> {
    if rays.len() < 2 {
        return None;
    }
    let theta = cfg.theta_th();
    let mut best: Option<(Vec3, usize)> = None;
    let mut needed = cfg.ransac_max_iterations;
    let mut iter = 0;
    let mut degenerate = 0;
    while iter < needed.min(cfg.ransac_max_iterations) {
        let i = rng.random_range(0..rays.len());
        let j = rng.random_range(0..rays.len());
        let n = rays[i].cross(&rays[j]);
        if i == j || n.norm() < 1e-6 {
            degenerate += 1;
            if degenerate > 10 * cfg.ransac_max_iterations {
                break;
            }
            continue;
        }
        iter += 1;
        let n = n.normalize();
        let count = rays
            .iter()
            .filter(|r| angle_to_circle(&n, r) <= theta)
            .count();
        if best.is_none_or(|(_, c)| count > c) {
            best = Some((n, count));
            let w = count as f64 / rays.len() as f64;
            let p_fail = 1.0 - w * w;
            needed = if p_fail <= 1e-12 {
                1
            } else {
                ((1.0 - cfg.ransac_confidence).ln() / p_fail.ln()).ceil() as usize
            };
        }
    }
    let (n, _) = best?;
    Some((n, inliers_of(rays, &n, theta)))
}

/// Robust great-circle fit for one edge group: RANSAC consensus, a
/// least-squares refit on the inliers, and the extremal inliers as the
/// arc endpoints. `None` when fewer than half the rays agree.
pub fn fit_great_circle(
    g: &EdgeGroup,
    cfg: &ThresholdConfig,
    rng: &mut impl Rng,
) -> Option<GreatCircleSegment> {
    let rays: Vec<Vec3> = g.rays.iter().map(|r| r.into_inner()).collect();
    let (n0, inliers) = ransac_great_circle(&rays, cfg, rng)?;
    if 2 * inliers.len() < rays.len() || inliers.len() < 2 {
        return None;
    }
    let theta = cfg.theta_th();
    let mut n = least_squares_normal(inliers.iter().map(|&i| (&rays[i], 1.0))).unwrap_or(n0);
    let mut refit = inliers_of(&rays, &n, theta);
    if refit.len() < inliers.len() {
        n = n0;
        refit = inliers;
    }
    if 2 * refit.len() < rays.len() || refit.len() < 2 {
        return None;
    }
    let pts: Vec<Vec3> = refit.iter().map(|&i| rays[i]).collect();
    let mut seg = arc_through(&n, &pts)?;
    seg.inlier_count = refit.len();
    seg.pixel_length = g.len();
    Some(seg)
}

/// Segment on the circle with normal `n` spanning `pts`: the complement of
/// the widest angular gap between consecutive projected points.
pub(crate) fn arc_through(n: &Vec3, pts: &[Vec3]) -> Option<GreatCircleSegment> {
    let e1 = project_to_circle(n, &pts.first()?.clone()).try_normalize(1e-12)?;
    let e2 = n.cross(&e1);
    let mut angles: Vec<f64> = pts.iter().map(|p| p.dot(&e2).atan2(p.dot(&e1))).collect();
    angles.sort_by(f64::total_cmp);
    let k = angles.len();
    let (mut gap, mut after) = (angles[0] + std::f64::consts::TAU - angles[k - 1], 0);
    for i in 1..k {
        let d = angles[i] - angles[i - 1];
        if d > gap {
            gap = d;
            after = i;
        }
    }
    let start = angles[after];
    let end = angles[(after + k - 1) % k];
    let at = |t: f64| Unit::new_normalize(e1 * t.cos() + e2 * t.sin());
    let (a, b) = (at(start), at(end));
    // orient the normal so the arc runs counter-clockwise from a to b
    let span = (end - start).rem_euclid(std::f64::consts::TAU);
    let normal = if span <= std::f64::consts::PI {
        *n
    } else {
        -*n
    };
    let endpoints = if span <= std::f64::consts::PI {
        [a, b]
    } else {
        [b, a]
    };
    Some(GreatCircleSegment {
        normal: Unit::new_normalize(normal),
        endpoints,
        inlier_count: pts.len(),
        pixel_length: pts.len(),
        axis: Axis::Unclassified,
    })
}

fn arc_gap(a: &GreatCircleSegment, b: &GreatCircleSegment) -> f64 {
    let overlaps = b
        .endpoints
        .iter()
        .any(|e| a.contains(&project_to_circle(&a.normal, e)))
        || a.endpoints
            .iter()
            .any(|e| b.contains(&project_to_circle(&b.normal, e)));
    if overlaps {
        0.0
    } else {
        b.endpoints
            .iter()
            .map(|e| a.endpoint_distance(e))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Merge segments lying on the same great circle (normals within θ_th,
/// sign-insensitive) whose arcs overlap or nearly touch.
pub fn merge_collinear(
    segments: Vec<GreatCircleSegment>,
    cfg: &ThresholdConfig,
) -> Vec<GreatCircleSegment> {
    let theta = cfg.theta_th();
    let gap = cfg.merge_gap_deg.to_radians();
    let n = segments.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut i = i;
        while p[i] != r {
            let next = p[i];
            p[i] = r;
            i = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (&segments[i], &segments[j]);
            let cos = a.normal.dot(&b.normal).abs().min(1.0);
            if cos.acos() > theta || arc_gap(a, b) > gap {
                continue;
            }
            let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
            if ri != rj {
                parent[rj.max(ri)] = ri.min(rj);
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        let r = find(&mut parent, i);
        clusters[r].push(i);
    }
    let mut out = Vec::new();
    for members in clusters.into_iter().filter(|c| !c.is_empty()) {
        if members.len() == 1 {
            out.push(segments[members[0]].clone());
            continue;
        }
        let reference = segments[members[0]].normal.into_inner();
        let normals: Vec<(Vec3, f64)> = members
            .iter()
            .map(|&i| {
                let s = &segments[i];
                let v = s.normal.into_inner();
                let v = if v.dot(&reference) < 0.0 { -v } else { v };
                (v, s.inlier_count.max(1) as f64)
            })
            .collect();
        let merged_n = normals
            .iter()
            .fold(Vec3::zeros(), |acc, (v, w)| acc + v * *w)
            .normalize();
        let ends: Vec<Vec3> = members
            .iter()
            .flat_map(|&i| segments[i].endpoints.iter().map(|e| e.into_inner()))
            .collect();
        let Some(mut seg) = arc_through(&merged_n, &ends) else {
            out.extend(members.iter().map(|&i| segments[i].clone()));
            continue;
        };
        seg.inlier_count = members.iter().map(|&i| segments[i].inlier_count).sum();
        seg.pixel_length = members.iter().map(|&i| segments[i].pixel_length).sum();
        seg.axis = segments[members[0]].axis;
        out.push(seg);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{angle_between, Dims, PixelCoord};
    use crate::lines::task_rng;
    use nalgebra::Vector3;
    use rand::Rng;

    fn group(rays: Vec<Vec3>) -> EdgeGroup {
        EdgeGroup {
            pixels: vec![PixelCoord::new(0.0, 0.0); rays.len()],
            cells: (0..rays.len()).map(|i| (0, i)).collect(),
            rays: rays.into_iter().map(Unit::new_normalize).collect(),
            dims: Dims::panorama(512),
        }
    }

    /// Points on the circle with normal `n`, spanning `span` radians.
    fn arc(n: &Vec3, count: usize, span: f64) -> Vec<Vec3> {
        let n = n.normalize();
        let e1 = n.cross(&Vector3::new(0.3, -0.7, 0.2)).normalize();
        let e2 = n.cross(&e1);
        (0..count)
            .map(|i| {
                let t = span * i as f64 / (count - 1) as f64;
                e1 * t.cos() + e2 * t.sin()
            })
            .collect()
    }

    fn perturb(v: &Vec3, sigma: f64, rng: &mut impl Rng) -> Vec3 {
        // Box-Muller on two tangent directions
        let t1 = v.cross(&Vector3::new(0.1, 0.2, 1.0)).normalize();
        let t2 = v.cross(&t1);
        let mut gauss = || {
            let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
            (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
        };
        (v + t1 * sigma * gauss() + t2 * sigma * gauss()).normalize()
    }

    #[test]
    fn exact_circle_is_recovered() {
        let g = group(arc(&Vector3::z(), 100, 1.0));
        let seg = fit_great_circle(&g, &ThresholdConfig::default(), &mut task_rng(0, 0)).unwrap();
        assert!((seg.normal.z.abs() - 1.0).abs() < 1e-12);
        assert_eq!(seg.inlier_count, 100);
        assert_eq!(seg.pixel_length, 100);
        for e in &seg.endpoints {
            assert!(seg.normal.dot(e).abs() < 1e-6);
        }
        assert!((seg.arc_angle() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn noisy_arc_is_within_half_degree() {
        let mut rng = task_rng(7, 0);
        let n = Vector3::new(0.3, -0.2, 0.9).normalize();
        let rays: Vec<_> = arc(&n, 100, 0.6)
            .iter()
            .map(|r| perturb(r, 0.2f64.to_radians(), &mut rng))
            .collect();
        let seg = fit_great_circle(&group(rays), &ThresholdConfig::default(), &mut rng).unwrap();
        let err = angle_between(&seg.normal, &n).min(angle_between(&seg.normal, &-n));
        assert!(err.to_degrees() < 0.5, "error {}", err.to_degrees());
    }

    #[test]
    fn outlier_majority_gives_none() {
        let mut rng = task_rng(3, 0);
        let mut rays = arc(&Vector3::z(), 40, 1.0);
        for _ in 0..60 {
            let v = Vector3::new(
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
                rng.random::<f64>() - 0.5,
            );
            rays.push(v.normalize());
        }
        assert!(fit_great_circle(&group(rays), &ThresholdConfig::default(), &mut rng).is_none());
    }

    #[test]
    fn reported_inliers_match_predicate() {
        let mut rng = task_rng(11, 0);
        let n = Vector3::new(-0.5, 0.5, 0.2).normalize();
        let rays: Vec<_> = arc(&n, 200, 0.8)
            .iter()
            .map(|r| perturb(r, 0.3f64.to_radians(), &mut rng))
            .collect();
        let g = group(rays);
        let cfg = ThresholdConfig::default();
        let seg = fit_great_circle(&g, &cfg, &mut rng).unwrap();
        let counted = g
            .rays
            .iter()
            .filter(|r| seg.is_inlier(r, cfg.theta_th()))
            .count();
        assert_eq!(counted, seg.inlier_count);
        assert!(seg.inlier_count <= seg.pixel_length);
    }

    #[test]
    fn collinear_pieces_merge() {
        let n = Vector3::new(0.2, 0.1, 1.0).normalize();
        let pts = arc(&n, 5, 1.0);
        let a = arc_through(&n, &pts[0..3]).unwrap();
        let b = arc_through(&n, &pts[2..5]).unwrap();
        let far = arc_through(&Vector3::x(), &arc(&Vector3::x(), 5, 0.5)).unwrap();
        let merged = merge_collinear(vec![a, b, far], &ThresholdConfig::default());
        assert_eq!(merged.len(), 2);
        let long = merged.iter().find(|s| s.arc_angle() > 0.9).unwrap();
        assert!((long.arc_angle() - 1.0).abs() < 1e-9);
    }
}
