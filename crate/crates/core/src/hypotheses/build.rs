//! Growing a closed Manhattan polygon from a handful of corner rays.
//!
//! Ceiling corners land on the plane `z = 1` directly. A floor corner
//! `c` lands at `h · (c_x, c_y) / (−c_z)`, so its position depends on the
//! unknown floor height. Heights are proposed from every floor/ceiling
//! pairing that could share a wall, the polygon is assembled for each,
//! and the most self-consistent result is kept.

use crate::corners::{CornerCandidate, Hemisphere};
use crate::geometry::Vec3;
use crate::lines::Axis;

use super::layout::{validate_layout, LayoutModel, Provenance};
use super::HypothesisConfig;

/// Floor height that puts floor corner `c` on the wall `axis = value`.
/// `None` when the constraint does not pin a positive height.
pub fn estimate_floor_height(c: &Vec3, axis: Axis, value: f64) -> Option<f64> {
    let k = axis.index().filter(|&k| k < 2)?;
    if !(c.z < 0.0) || c[k].abs() < 1e-12 {
        return None;
    }
    let h = -c.z * value / c[k];
    (h.is_finite() && h > 0.0).then_some(h)
}

#[derive(Debug, Clone, Copy)]
struct Anchor {
    /// Ceiling position, or the floor direction `(c_x, c_y)/(−c_z)`.
    xy: [f64; 2],
    floor: bool,
    id: usize,
}

impl Anchor {
    fn at(&self, h: f64) -> [f64; 2] {
        if self.floor {
            [self.xy[0] * h, self.xy[1] * h]
        } else {
            self.xy
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Gap {
    /// Same point (a ceiling corner and the floor corner below it).
    Same,
    Aligned(Axis),
    Open,
}

fn classify_gap(a: [f64; 2], b: [f64; 2], tol: f64) -> Gap {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let scale = a[0].hypot(a[1]).max(b[0].hypot(b[1]));
    let len = dx.hypot(dy);
    if len <= tol.tan() * scale * 0.5 {
        return Gap::Same;
    }
    let angle = dy.abs().atan2(dx.abs());
    if angle <= tol {
        Gap::Aligned(Axis::X)
    } else if std::f64::consts::FRAC_PI_2 - angle <= tol {
        Gap::Aligned(Axis::Y)
    } else {
        Gap::Open
    }
}

fn flip(a: Axis) -> Axis {
    if a == Axis::X {
        Axis::Y
    } else {
        Axis::X
    }
}

/// One corner or an inserted vertex, with the edges leaving and entering it.
#[derive(Debug, Clone)]
struct Vertex {
    /// Indices into the anchor list that sit on this vertex.
    members: Vec<usize>,
    /// For inserted vertices: take x from this anchor, y from that one.
    hidden: Option<(usize, usize)>,
}

#[derive(Debug, Clone)]
struct Plan {
    vertices: Vec<Vertex>,
    /// Axis of edge `i` (from vertex `i` to `i + 1`).
    edges: Vec<Axis>,
}

/// Merge coincident neighbours, then walk the ring assigning edge axes
/// that alternate, inserting one hidden vertex per open gap.
fn plan(points: &[[f64; 2]], tol: f64, first: Axis) -> Option<Plan> {
    let n = points.len();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        match groups.last_mut() {
            Some(g) if classify_gap(points[*g.last().unwrap()], points[i], tol) == Gap::Same => {
                g.push(i)
            }
            _ => groups.push(vec![i]),
        }
    }
    if groups.len() > 1 {
        let last = groups.last().unwrap();
        if classify_gap(points[*last.last().unwrap()], points[groups[0][0]], tol) == Gap::Same {
            let tail = groups.pop().unwrap();
            groups[0].splice(0..0, tail);
        }
    }
    if groups.len() < 2 {
        return None;
    }
    let rep = |g: &Vec<usize>| -> [f64; 2] {
        let k = g.len() as f64;
        let s = g.iter().fold([0.0, 0.0], |acc, &i| {
            [acc[0] + points[i][0], acc[1] + points[i][1]]
        });
        [s[0] / k, s[1] / k]
    };
    let m = groups.len();
    let mut vertices = Vec::new();
    let mut edges = Vec::new();
    let mut expect = first;
    for i in 0..m {
        let (a, b) = (rep(&groups[i]), rep(&groups[(i + 1) % m]));
        vertices.push(Vertex {
            members: groups[i].clone(),
            hidden: None,
        });
        match classify_gap(a, b, tol) {
            Gap::Same => return None,
            Gap::Aligned(axis) => {
                if axis != expect {
                    return None;
                }
                edges.push(axis);
                expect = flip(expect);
            }
            Gap::Open => {
                let (from, to) = (groups[i][0], groups[(i + 1) % m][0]);
                // running along x first keeps y of the start, x of the end
                let hidden = if expect == Axis::X {
                    (to, from)
                } else {
                    (from, to)
                };
                edges.push(expect);
                vertices.push(Vertex {
                    members: Vec::new(),
                    hidden: Some(hidden),
                });
                edges.push(flip(expect));
            }
        }
    }
    (expect == first).then_some(Plan { vertices, edges })
}

/// Polygon from a plan: each X edge fixes the shared `y` of its two ends
/// (averaged over the anchors on them), each Y edge the shared `x`.
fn realize(plan: &Plan, points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = plan.vertices.len();
    let coord = |v: &Vertex, k: usize| -> Option<f64> {
        if v.members.is_empty() {
            return None;
        }
        Some(v.members.iter().map(|&i| points[i][k]).sum::<f64>() / v.members.len() as f64)
    };
    let hidden_coord = |v: &Vertex, k: usize| -> f64 {
        let (xs, ys) = v.hidden.expect("inserted vertex");
        points[if k == 0 { xs } else { ys }][k]
    };
    let value = |v: &Vertex, k: usize| coord(v, k).unwrap_or_else(|| hidden_coord(v, k));
    let mut poly = vec![[0.0; 2]; n];
    for (i, &axis) in plan.edges.iter().enumerate() {
        let j = (i + 1) % n;
        // X edge: same y at both ends; Y edge: same x
        let k = if axis == Axis::X { 1 } else { 0 };
        let (vi, vj) = (&plan.vertices[i], &plan.vertices[j]);
        let shared = match (coord(vi, k), coord(vj, k)) {
            (Some(a), Some(b)) => 0.5 * (a + b),
            (Some(a), None) | (None, Some(a)) => a,
            (None, None) => 0.5 * (value(vi, k) + value(vj, k)),
        };
        poly[i][k] = shared;
        poly[j][k] = shared;
    }
    poly
}

/// Height constraints from edges joining a floor anchor to a ceiling
/// anchor directly, as `(floor anchor, axis of the shared coordinate, value)`.
fn height_constraints(plan: &Plan, anchors: &[Anchor]) -> Vec<(usize, usize, f64)> {
    let n = plan.vertices.len();
    let mut out = Vec::new();
    let mut pair = |a: usize, b: usize, k: usize| {
        let (fa, fb) = (anchors[a].floor, anchors[b].floor);
        if fa != fb {
            let (f, c) = if fa { (a, b) } else { (b, a) };
            out.push((f, k, anchors[c].xy[k]));
        }
    };
    for v in &plan.vertices {
        for (x, &a) in v.members.iter().enumerate() {
            for &b in &v.members[x + 1..] {
                pair(a, b, 0);
                pair(a, b, 1);
            }
        }
    }
    for (i, &axis) in plan.edges.iter().enumerate() {
        let (vi, vj) = (&plan.vertices[i], &plan.vertices[(i + 1) % n]);
        let k = if axis == Axis::X { 1 } else { 0 };
        for &a in &vi.members {
            for &b in &vj.members {
                pair(a, b, k);
            }
        }
    }
    out
}

fn same_structure(a: &Plan, b: &Plan) -> bool {
    a.edges == b.edges
        && a.vertices.len() == b.vertices.len()
        && a.vertices
            .iter()
            .zip(&b.vertices)
            .all(|(x, y)| x.members == y.members && x.hidden == y.hidden)
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

struct Candidate {
    layout: LayoutModel,
    residual: f64,
}

fn attempt(anchors: &[Anchor], h: f64, first: Axis, cfg: &HypothesisConfig) -> Option<Candidate> {
    let tol = cfg.manhattan_tol_deg.to_radians();
    let points: Vec<[f64; 2]> = anchors.iter().map(|a| a.at(h)).collect();
    let p0 = plan(&points, tol, first)?;
    let constraints = height_constraints(&p0, anchors);
    let hs: Vec<f64> = constraints
        .iter()
        .filter_map(|&(f, k, value)| {
            let a = anchors[f].xy;
            (a[k].abs() > 1e-12)
                .then(|| value / a[k])
                .filter(|h| *h > 0.0)
        })
        .collect();
    if hs.is_empty() {
        return None;
    }
    let h_med = median(hs);
    let mut residual = 0.0;
    for &(f, k, value) in &constraints {
        let err = (h_med * anchors[f].xy[k] - value).abs();
        if err > tol.tan() * value.abs() {
            return None;
        }
        residual += err / value.abs().max(1e-12);
    }
    let points: Vec<[f64; 2]> = anchors.iter().map(|a| a.at(h_med)).collect();
    let p1 = plan(&points, tol, first)?;
    if !same_structure(&p0, &p1) {
        return None;
    }
    let polygon = realize(&p1, &points);
    for (i, v) in p1.vertices.iter().enumerate() {
        for &m in &v.members {
            let (dx, dy) = (polygon[i][0] - points[m][0], polygon[i][1] - points[m][1]);
            residual += dx.hypot(dy) / points[m][0].hypot(points[m][1]);
        }
    }
    let inserted = p1.vertices.iter().map(|v| v.hidden.is_some()).collect();
    let mut corners: Vec<usize> = anchors.iter().map(|a| a.id).collect();
    corners.sort_unstable();
    Some(Candidate {
        layout: LayoutModel {
            polygon,
            h: h_med,
            rotation: Default::default(),
            provenance: Provenance {
                corners,
                inserted,
                attempt: 0,
            },
        },
        residual,
    })
}

/// Assemble a layout from sampled corners (directions in the Manhattan
/// frame). Returns `None` when no height and orientation choice yields a
/// layout passing every invariant.
pub fn build_layout(
    group: &[(usize, &CornerCandidate)],
    cfg: &HypothesisConfig,
) -> Option<LayoutModel> {
    let mut anchors: Vec<Anchor> = group
        .iter()
        .map(|(id, c)| {
            let d = c.dir.into_inner();
            let floor = c.hemisphere == Hemisphere::Floor;
            let s = if floor { -1.0 / d.z } else { 1.0 / d.z };
            Anchor {
                xy: [d.x * s, d.y * s],
                floor,
                id: *id,
            }
        })
        .collect();
    if anchors
        .iter()
        .any(|a| !a.xy[0].is_finite() || !a.xy[1].is_finite())
    {
        return None;
    }
    // clockwise seen from above: decreasing azimuth
    anchors.sort_by(|a, b| {
        let (aa, ab) = (a.xy[1].atan2(a.xy[0]), b.xy[1].atan2(b.xy[0]));
        ab.total_cmp(&aa).then(a.id.cmp(&b.id))
    });
    let mut heights = Vec::new();
    for f in anchors.iter().filter(|a| a.floor) {
        for c in anchors.iter().filter(|a| !a.floor) {
            for k in 0..2 {
                if f.xy[k].abs() > 1e-12 {
                    let h = c.xy[k] / f.xy[k];
                    if h > 0.0 && h.is_finite() {
                        heights.push(h);
                    }
                }
            }
        }
    }
    heights.sort_by(f64::total_cmp);
    heights.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());

    let mut best: Option<Candidate> = None;
    for &h in &heights {
        for first in [Axis::X, Axis::Y] {
            let Some(c) = attempt(&anchors, h, first, cfg) else {
                continue;
            };
            if validate_layout(&c.layout, cfg.manhattan_tol_deg).is_err() {
                continue;
            }
            if best.as_ref().is_none_or(|b| c.residual < b.residual) {
                best = Some(c);
            }
        }
    }
    best.map(|c| c.layout)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corners::classify_corner;
    use nalgebra::{Unit, Vector3};

    fn corner(p: Vec3) -> CornerCandidate {
        let dir = Unit::new_normalize(p);
        let (hemisphere, quadrant) = classify_corner(&dir).unwrap();
        CornerCandidate {
            dir,
            hemisphere,
            quadrant,
            parents: (0, 0),
            weight: 1.0,
        }
    }

    fn build(points: &[Vec3]) -> Option<LayoutModel> {
        let cands: Vec<_> = points.iter().map(|p| corner(*p)).collect();
        let group: Vec<_> = cands.iter().enumerate().collect();
        build_layout(&group, &HypothesisConfig::default())
    }

    #[test]
    fn height_closed_forms() {
        let c = Vector3::new(1.0, 1.0, -1.0).normalize();
        assert!((estimate_floor_height(&c, Axis::X, 2.0).unwrap() - 2.0).abs() < 1e-12);
        let c = Vector3::new(1.0, 0.0, -2.0).normalize();
        assert!((estimate_floor_height(&c, Axis::X, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!(estimate_floor_height(&c, Axis::Y, 1.0).is_none());
        assert!(estimate_floor_height(&-c, Axis::X, 1.0).is_none());
        assert!(estimate_floor_height(&c, Axis::X, -1.0).is_none());
    }

    #[test]
    fn box_from_four_true_corners() {
        let (x0, x1, y0, y1, h) = (-1.3, 2.1, -0.8, 1.7, 1.6);
        let layout = build(&[
            Vector3::new(x1, y1, 1.0),
            Vector3::new(x0, y1, 1.0),
            Vector3::new(x0, y0, -h),
            Vector3::new(x1, y0, -h),
        ])
        .unwrap();
        assert!((layout.h - h).abs() < 1e-9 * h);
        assert_eq!(layout.wall_count(), 4);
        let mut got = layout.polygon.clone();
        got.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
        let want = [[x0, y0], [x0, y1], [x1, y0], [x1, y1]];
        for (g, w) in got.iter().zip(&want) {
            assert!(
                (g[0] - w[0]).abs() < 1e-6 && (g[1] - w[1]).abs() < 1e-6,
                "{got:?}"
            );
        }
    }

    #[test]
    fn three_corners_close_a_box_with_one_hidden_vertex() {
        let (x0, x1, y0, y1, h) = (-1.0, 1.5, -2.0, 1.2, 1.3);
        let layout = build(&[
            Vector3::new(x0, y1, 1.0),
            Vector3::new(x0, y0, -h),
            Vector3::new(x1, y0, 1.0),
        ])
        .unwrap();
        assert_eq!(layout.wall_count(), 4);
        assert_eq!(layout.provenance.inserted.iter().filter(|&&b| b).count(), 1);
        assert!((layout.h - h).abs() < 1e-9 * h);
    }

    #[test]
    fn six_walls_from_four_corners() {
        // L-shaped room; corners of the notch are not sampled
        let h = 1.4;
        let poly = [
            [-1.0, 2.0],
            [1.0, 2.0],
            [1.0, 0.5],
            [3.0, 0.5],
            [3.0, -1.0],
            [-1.0, -1.0],
        ];
        let layout = build(&[
            Vector3::new(poly[0][0], poly[0][1], 1.0),
            Vector3::new(poly[1][0], poly[1][1], -h),
            Vector3::new(poly[3][0], poly[3][1], 1.0),
            Vector3::new(poly[5][0], poly[5][1], -h),
        ])
        .unwrap();
        assert_eq!(layout.wall_count(), 6);
        assert!((layout.h - h).abs() < 1e-9 * h);
        assert_eq!(layout.provenance.inserted.iter().filter(|&&b| b).count(), 2);
    }

    #[test]
    fn non_manhattan_closure_is_rejected() {
        // two opposite ceiling corners and a floor corner in a third
        // quadrant that lines up with neither
        let layout = build(&[
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(-1.3, 0.6, -1.0),
            Vector3::new(-0.7, -1.6, 1.0),
        ]);
        assert!(layout.is_none());
    }
}
