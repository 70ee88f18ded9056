use std::fmt;

use serde::{Deserialize, Serialize};

use crate::corners::Quadrant;
use crate::error::{Error, Result};
use crate::geometry::RotationMatrix;
use crate::lines::Axis;

/// Where a layout came from: the sampled candidates and which polygon
/// vertices were inserted to close it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Provenance {
    pub corners: Vec<usize>,
    pub inserted: Vec<bool>,
    /// Sampling attempt that produced the layout.
    pub attempt: usize,
}

/// A closed rectilinear room: ceiling polygon on the plane `z = +1` of the
/// Manhattan frame, floor on `z = −h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutModel {
    /// Clockwise (seen from above) ceiling vertices.
    pub polygon: Vec<[f64; 2]>,
    pub h: f64,
    /// Manhattan frame to panorama frame.
    pub rotation: RotationMatrix,
    #[serde(default)]
    pub provenance: Provenance,
}

impl LayoutModel {
    pub fn new(polygon: Vec<[f64; 2]>, h: f64) -> Self {
        LayoutModel {
            polygon,
            h,
            rotation: RotationMatrix::identity(),
            provenance: Provenance::default(),
        }
    }

    pub fn wall_count(&self) -> usize {
        self.polygon.len()
    }

    /// Edge `i` runs from vertex `i` to vertex `i + 1`.
    pub fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.polygon.len();
        (self.polygon[i], self.polygon[(i + 1) % n])
    }

    /// Direction an edge runs along (`X` or `Y`), by its larger extent.
    pub fn edge_axis(&self, i: usize) -> Axis {
        let (a, b) = self.edge(i);
        if (b[0] - a[0]).abs() >= (b[1] - a[1]).abs() {
            Axis::X
        } else {
            Axis::Y
        }
    }

    /// Signed area; negative for clockwise polygons.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.polygon)
    }
}

pub(crate) fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Ray-casting point-in-polygon with half-open edges.
pub fn point_in_polygon(poly: &[[f64; 2]], p: [f64; 2]) -> bool {
    let n = poly.len();
    let mut inside = false;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn point_segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * d[0] - p[0], a[1] + t * d[1] - p[1]];
    q[0].hypot(q[1])
}

fn segments_intersect(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let cross = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| {
        (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])
    };
    let on = |o: [f64; 2], p: [f64; 2], q: [f64; 2]| {
        q[0] >= o[0].min(p[0])
            && q[0] <= o[0].max(p[0])
            && q[1] >= o[1].min(p[1])
            && q[1] <= o[1].max(p[1])
    };
    let (d1, d2) = (cross(c, d, a), cross(c, d, b));
    let (d3, d4) = (cross(a, b, c), cross(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on(c, d, a))
        || (d2 == 0.0 && on(c, d, b))
        || (d3 == 0.0 && on(a, b, c))
        || (d4 == 0.0 && on(a, b, d))
}

/// A broken layout invariant.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Height,
    VertexCount(usize),
    NotAxisParallel(usize),
    NoAlternation(usize),
    NotSimple,
    OriginOutside,
    CounterClockwise,
    TooManyWalls { walls: usize, max: usize },
    VertexOnDivider(usize),
    EvenQuadrant(Quadrant, usize),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Height => write!(f, "floor height must be positive and finite"),
            Violation::VertexCount(n) => {
                write!(f, "{n} vertices; need an even count of at least 4")
            }
            Violation::NotAxisParallel(i) => write!(f, "edge {i} is not axis-parallel"),
            Violation::NoAlternation(i) => {
                write!(f, "edges {i} and {} share an orientation", i + 1)
            }
            Violation::NotSimple => write!(f, "polygon self-intersects"),
            Violation::OriginOutside => write!(f, "camera is not strictly inside the room"),
            Violation::CounterClockwise => write!(f, "polygon is not clockwise"),
            Violation::TooManyWalls { walls, max } => {
                write!(f, "{walls} walls exceed the bound {max}")
            }
            Violation::VertexOnDivider(i) => write!(f, "vertex {i} lies on a quadrant divider"),
            Violation::EvenQuadrant(q, n) => {
                write!(f, "{n} vertices in {q:?}; expected an odd count")
            }
        }
    }
}

/// Check every structural invariant of a layout. `tol_deg` bounds how far
/// an edge may deviate from its axis (so corners stay within 90° ± tol).
pub fn validate_layout(layout: &LayoutModel, tol_deg: f64) -> std::result::Result<(), Violation> {
    let poly = &layout.polygon;
    let n = poly.len();
    if !(layout.h.is_finite() && layout.h > 0.0) {
        return Err(Violation::Height);
    }
    if n < 4 || n % 2 == 1 || poly.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Violation::VertexCount(n));
    }
    let tol = tol_deg.to_radians().tan();
    let mut axes = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = layout.edge(i);
        let (dx, dy) = ((b[0] - a[0]).abs(), (b[1] - a[1]).abs());
        let (long, short) = (dx.max(dy), dx.min(dy));
        if !(long > 0.0) || short > tol * long {
            return Err(Violation::NotAxisParallel(i));
        }
        axes.push(layout.edge_axis(i));
    }
    for i in 0..n {
        if axes[i] == axes[(i + 1) % n] {
            return Err(Violation::NoAlternation(i));
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            let (a, b) = layout.edge(i);
            let (c, d) = layout.edge(j);
            if segments_intersect(a, b, c, d) {
                return Err(Violation::NotSimple);
            }
        }
    }
    let scale = poly
        .iter()
        .map(|p| p[0].abs().max(p[1].abs()))
        .fold(0.0, f64::max);
    let on_edge = (0..n).any(|i| {
        let (a, b) = layout.edge(i);
        point_segment_distance([0.0, 0.0], a, b) <= 1e-9 * scale.max(1.0)
    });
    if on_edge || !point_in_polygon(poly, [0.0, 0.0]) {
        return Err(Violation::OriginOutside);
    }
    if layout.signed_area() >= 0.0 {
        return Err(Violation::CounterClockwise);
    }
    let sampled = layout.provenance.corners.len();
    if sampled > 0 && n > 2 * (sampled - 1) {
        return Err(Violation::TooManyWalls {
            walls: n,
            max: 2 * (sampled - 1),
        });
    }
    let mut per_quadrant = [0usize; 4];
    for (i, p) in poly.iter().enumerate() {
        match Quadrant::of(p[0], p[1]) {
            Some(q) => per_quadrant[q.index()] += 1,
            None => return Err(Violation::VertexOnDivider(i)),
        }
    }
    for q in Quadrant::ALL {
        let count = per_quadrant[q.index()];
        if count % 2 == 0 {
            return Err(Violation::EvenQuadrant(q, count));
        }
    }
    Ok(())
}

/// [`validate_layout`] as a crate error.
pub fn check_layout(layout: &LayoutModel, tol_deg: f64) -> Result<()> {
    validate_layout(layout, tol_deg).map_err(|v| Error::invalid(format!("invalid layout: {v}")))
}

/// Clockwise rectangle `[x0, x1] × [y0, y1]`.
pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, h: f64) -> LayoutModel {
    LayoutModel::new(vec![[x0, y1], [x1, y1], [x1, y0], [x0, y0]], h)
}
