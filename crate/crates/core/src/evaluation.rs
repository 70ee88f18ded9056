//! Orientation label images, the equally-oriented-pixel ratio, and
//! hypothesis selection.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dims, RayGrid, Vec3};
use crate::hypotheses::{check_layout, LayoutModel};
use crate::lines::Axis;

/// Surface orientation of a pixel: the axis of its surface normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    #[default]
    None,
    X,
    Y,
    Z,
}

impl Label {
    pub fn from_axis_index(k: usize) -> Label {
        match k {
            0 => Label::X,
            1 => Label::Y,
            2 => Label::Z,
            _ => Label::None,
        }
    }

    pub fn axis(self) -> Axis {
        match self {
            Label::X => Axis::X,
            Label::Y => Axis::Y,
            Label::Z => Axis::Z,
            Label::None => Axis::Unclassified,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImage {
    dims: Dims,
    labels: Vec<Label>,
}

impl LabeledImage {
    pub fn from_labels(dims: Dims, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != dims.len() {
            return Err(Error::invalid(format!(
                "label image needs {} labels, got {}",
                dims.len(),
                labels.len()
            )));
        }
        Ok(LabeledImage { dims, labels })
    }

    pub fn filled(dims: Dims, label: Label) -> Self {
        LabeledImage {
            dims,
            labels: vec![label; dims.len()],
        }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Label {
        self.labels[self.dims.index(row, col)]
    }

    /// Fraction of pixels carrying each of X, Y, Z.
    pub fn fractions(&self) -> [f64; 3] {
        let mut counts = [0usize; 3];
        for l in &self.labels {
            match l {
                Label::X => counts[0] += 1,
                Label::Y => counts[1] += 1,
                Label::Z => counts[2] += 1,
                Label::None => {}
            }
        }
        counts.map(|c| c as f64 / self.labels.len() as f64)
    }

    /// Nearest-neighbour resample to other panorama dims.
    pub fn resample(&self, dims: Dims) -> LabeledImage {
        if dims == self.dims {
            return self.clone();
        }
        let mut labels = Vec::with_capacity(dims.len());
        for r in 0..dims.rows {
            let sr = (((r as f64 + 0.5) * self.dims.rows as f64 / dims.rows as f64) as usize)
                .min(self.dims.rows - 1);
            for c in 0..dims.cols {
                let sc = (((c as f64 + 0.5) * self.dims.cols as f64 / dims.cols as f64) as usize)
                    .min(self.dims.cols - 1);
                labels.push(self.get(sr, sc));
            }
        }
        LabeledImage { dims, labels }
    }
}

fn wall_label(layout: &LayoutModel, i: usize) -> Label {
    let (a, b) = layout.edge(i);
    if (b[0] - a[0]).abs() >= (b[1] - a[1]).abs() {
        Label::Y
    } else {
        Label::X
    }
}

/// Distance along the horizontal direction `(dx, dy)` to wall `i`, if
/// the ray crosses it (half-open at the wall's second vertex).
#[inline]
fn wall_hit(layout: &LayoutModel, i: usize, dx: f64, dy: f64) -> Option<f64> {
    let (a, b) = layout.edge(i);
    let e = [b[0] - a[0], b[1] - a[1]];
    let denom = dx * e[1] - dy * e[0];
    if denom.abs() < 1e-15 {
        return None;
    }
    // origin + t·d = a + s·e
    let t = (a[0] * e[1] - a[1] * e[0]) / denom;
    let s = (a[0] * dy - a[1] * dx) / denom;
    (t > 0.0 && (0.0..1.0).contains(&s)).then_some(t)
}

#[inline]
fn plane_distance(layout: &LayoutModel, v: &Vec3) -> f64 {
    if v.z > 0.0 {
        1.0 / v.z
    } else if v.z < 0.0 {
        layout.h / -v.z
    } else {
        f64::INFINITY
    }
}

/// Label of the face a ray (in the layout's Manhattan frame) exits
/// through. Walls are found by walking the 2D ray to its first crossing
/// of the polygon boundary; edges are half-open so a ray through a vertex
/// picks exactly one wall.
pub fn label_ray(layout: &LayoutModel, v: &Vec3) -> Label {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..layout.polygon.len() {
        if let Some(t) = wall_hit(layout, i, v.x, v.y) {
            if best.is_none_or(|(_, b)| t < b) {
                best = Some((i, t));
            }
        }
    }
    match best {
        Some((i, t)) if t < plane_distance(layout, v) => wall_label(layout, i),
        _ => Label::Z,
    }
}

/// Monotone stand-in for `atan2(y, x)`, in `[0, 4)`.
#[inline]
fn pseudo_angle(x: f64, y: f64) -> f64 {
    let p = x / (x.abs() + y.abs());
    if y < 0.0 {
        3.0 + p
    } else {
        1.0 - p
    }
}

/// A direction with the given pseudo-angle.
fn pseudo_direction(p: f64) -> (f64, f64) {
    let p = p.rem_euclid(4.0);
    if p < 2.0 {
        let x = 1.0 - p;
        (x, 1.0 - x.abs())
    } else {
        let x = p - 3.0;
        (x, -(1.0 - x.abs()))
    }
}

/// Nearest wall per azimuth sector. Between consecutive vertex azimuths
/// the set of walls a ray crosses and their depth order cannot change, so
/// one wall per sector answers every ray in it.
struct SectorTable {
    starts: Vec<f64>,
    walls: Vec<Option<usize>>,
}

impl SectorTable {
    fn new(layout: &LayoutModel) -> Self {
        let mut starts: Vec<f64> = layout
            .polygon
            .iter()
            .map(|p| pseudo_angle(p[0], p[1]))
            .collect();
        starts.sort_by(f64::total_cmp);
        starts.dedup();
        let n = starts.len();
        let walls = (0..n)
            .map(|k| {
                let lo = starts[k];
                let hi = if k + 1 < n {
                    starts[k + 1]
                } else {
                    starts[0] + 4.0
                };
                let (dx, dy) = pseudo_direction(0.5 * (lo + hi));
                (0..layout.polygon.len())
                    .filter_map(|i| wall_hit(layout, i, dx, dy).map(|t| (i, t)))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(i, _)| i)
            })
            .collect();
        SectorTable { starts, walls }
    }

    #[inline]
    fn wall(&self, v: &Vec3) -> Option<usize> {
        self.wall_at(pseudo_angle(v.x, v.y))
    }

    #[inline]
    fn wall_at(&self, az: f64) -> Option<usize> {
        let k = self.starts.partition_point(|&s| s <= az);
        self.walls[if k == 0 { self.walls.len() - 1 } else { k - 1 }]
    }
}

/// Orientation image of a layout as seen from the camera.
pub fn render_labels(layout: &LayoutModel, dims: Dims) -> Result<LabeledImage> {
    Dims::new(dims.rows, dims.cols)?;
    render_labels_on(layout, &RayGrid::new(dims))
}

/// [`render_labels`] over pre-computed pixel rays.
pub fn render_labels_on(layout: &LayoutModel, grid: &RayGrid) -> Result<LabeledImage> {
    check_layout(layout, 5.0)?;
    let inv = layout.rotation.inverse();
    let table = SectorTable::new(layout);
    // per wall: label, edge vector, and cross(a, e)
    let walls: Vec<(Label, [f64; 2], f64)> = (0..layout.polygon.len())
        .map(|i| {
            let (a, b) = layout.edge(i);
            let e = [b[0] - a[0], b[1] - a[1]];
            (wall_label(layout, i), e, a[0] * e[1] - a[1] * e[0])
        })
        .collect();
    let h = layout.h;
    let label = |v: &Vec3| -> Label {
        let Some(i) = table.wall(v) else {
            return label_ray(layout, v);
        };
        let (l, e, c) = walls[i];
        let denom = v.x * e[1] - v.y * e[0];
        if denom.abs() < 1e-15 {
            return label_ray(layout, v);
        }
        // wall distance t = c / denom, compared against the plane distance
        let tz = c * v.z / denom;
        let is_wall = if v.z > 0.0 {
            tz < 1.0
        } else if v.z < 0.0 {
            -tz < h
        } else {
            true
        };
        if is_wall {
            l
        } else {
            Label::Z
        }
    };
    let m = inv.matrix();
    let mut labels = vec![Label::None; grid.dims.len()];
    labels
        .par_chunks_mut(grid.dims.cols)
        .zip(grid.rays().par_chunks(grid.dims.cols))
        .for_each(|(out, rays)| {
            for (o, r) in out.iter_mut().zip(rays) {
                *o = label(&(m * r));
            }
        });
    LabeledImage::from_labels(grid.dims, labels)
}

/// Equally oriented pixel ratio: share of all pixels where both images
/// carry the same (non-none) label.
pub fn eop(a: &LabeledImage, b: &LabeledImage) -> Result<f64> {
    if a.dims != b.dims {
        return Err(Error::invalid(format!(
            "label images differ in size: {}x{} vs {}x{}",
            a.dims.rows, a.dims.cols, b.dims.rows, b.dims.cols
        )));
    }
    let hits = a
        .labels
        .iter()
        .zip(&b.labels)
        .filter(|(x, y)| **x != Label::None && x == y)
        .count();
    Ok(hits as f64 / a.labels.len() as f64)
}

/// Index and score of the layout whose rendering best matches `reference`.
/// Ties go to fewer walls, then to the earlier hypothesis.
pub fn select_best(hyps: &[LayoutModel], reference: &LabeledImage) -> Result<(usize, f64)> {
    if hyps.is_empty() {
        return Err(Error::invalid("no hypotheses to select from"));
    }
    let scores = score_hypotheses(hyps, reference)?;
    let best = pick_best(hyps, &scores);
    Ok((best, scores[best]))
}

/// Selection rule of [`select_best`] over already computed scores.
pub fn pick_best(hyps: &[LayoutModel], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..hyps.len().min(scores.len()) {
        let better = scores[i] > scores[best]
            || (scores[i] == scores[best] && hyps[i].wall_count() < hyps[best].wall_count());
        if better {
            best = i;
        }
    }
    best
}

/// EOP of every hypothesis against `reference`, in input order.
pub fn score_hypotheses(hyps: &[LayoutModel], reference: &LabeledImage) -> Result<Vec<f64>> {
    let grid = RayGrid::new(reference.dims);
    hyps.iter()
        .map(|h| eop(&render_labels_on(h, &grid)?, reference))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypotheses::rectangle;
    use nalgebra::Vector3;
    use proptest::prelude::*;

    fn brute_force_eop(a: &LabeledImage, b: &LabeledImage) -> f64 {
        let mut hits = 0usize;
        for r in 0..a.dims().rows {
            for c in 0..a.dims().cols {
                for label in [Label::X, Label::Y, Label::Z] {
                    if a.get(r, c) == label && b.get(r, c) == label {
                        hits += 1;
                    }
                }
            }
        }
        hits as f64 / a.dims().len() as f64
    }

    #[test]
    fn pseudo_angle_is_monotone_and_invertible() {
        let mut last = -1.0;
        for k in 0..720 {
            let a = -std::f64::consts::PI + k as f64 * std::f64::consts::TAU / 720.0 + 1e-9;
            let (x, y) = (a.cos(), a.sin());
            let p = pseudo_angle(x, y);
            assert!((0.0..4.0).contains(&p));
            if k > 0 && a < std::f64::consts::PI {
                // the seam sits at angle ±π, i.e. pseudo-angle 2
                assert!(p > last || (last >= 2.0 && p < 2.0) || (last < 2.0 && p >= 2.0));
            }
            last = p;
            let (dx, dy) = pseudo_direction(p);
            assert!((dy.atan2(dx) - a).abs() < 1e-9 || (dy.atan2(dx) - a).abs() > 6.0);
        }
    }

    #[test]
    fn unit_box_axis_rays() {
        let b = rectangle(-1.0, 1.0, -1.0, 1.0, 1.0);
        assert_eq!(label_ray(&b, &Vector3::new(0.0, 0.0, 1.0)), Label::Z);
        assert_eq!(label_ray(&b, &Vector3::new(1.0, 0.0, 0.0)), Label::X);
        assert_eq!(label_ray(&b, &Vector3::new(0.0, 1.0, 0.0)), Label::Y);
        assert_eq!(label_ray(&b, &Vector3::new(0.0, 0.0, -1.0)), Label::Z);
    }

    #[test]
    fn rendered_box_has_no_unlabeled_pixel() {
        let b = rectangle(-1.3, 0.7, -2.0, 1.1, 1.4);
        let img = render_labels(&b, Dims::panorama(32)).unwrap();
        assert!(img.labels().iter().all(|&l| l != Label::None));
        let f = img.fractions();
        assert!(f.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn eop_examples() {
        let dims = Dims::panorama(1);
        let a = LabeledImage::from_labels(dims, vec![Label::X, Label::Y]).unwrap();
        assert_eq!(eop(&a, &a).unwrap(), 1.0);
        let x = LabeledImage::filled(dims, Label::X);
        let y = LabeledImage::filled(dims, Label::Y);
        assert_eq!(eop(&x, &y).unwrap(), 0.0);
        let a = LabeledImage::from_labels(dims, vec![Label::X, Label::Y]).unwrap();
        assert!(eop(&a, &LabeledImage::filled(Dims::panorama(2), Label::X)).is_err());
    }

    #[test]
    fn two_by_two_case() {
        // a 2x2 block is not a panorama, so embed it in a 2x4 image padded
        // with pixels that never match
        let dims = Dims::panorama(2);
        use Label::*;
        let a =
            LabeledImage::from_labels(dims, vec![X, Y, None, None, Z, None, None, None]).unwrap();
        let b =
            LabeledImage::from_labels(dims, vec![X, Z, None, None, Z, None, None, None]).unwrap();
        assert_eq!(eop(&a, &b).unwrap() * 8.0, 2.0);
        assert_eq!(eop(&a, &b).unwrap(), brute_force_eop(&a, &b));
    }

    #[test]
    fn selection_prefers_truth_then_fewer_walls() {
        let truth = rectangle(-1.0, 1.5, -1.2, 0.8, 1.3);
        let other = rectangle(-2.0, 1.0, -0.5, 2.0, 0.9);
        let dims = Dims::panorama(32);
        let reference = render_labels(&truth, dims).unwrap();
        let (i, s) = select_best(&[other.clone(), truth.clone()], &reference).unwrap();
        assert_eq!(i, 1);
        assert_eq!(s, 1.0);
        let (i, _) = select_best(&[truth.clone(), truth], &reference).unwrap();
        assert_eq!(i, 0);
        assert!(select_best(&[], &reference).is_err());
    }

    fn label_strategy() -> impl Strategy<Value = Label> {
        prop_oneof![
            Just(Label::None),
            Just(Label::X),
            Just(Label::Y),
            Just(Label::Z)
        ]
    }

    proptest! {
        #[test]
        fn sector_rendering_matches_per_ray_labels(
            x0 in -3.0f64..-0.3, x1 in 0.3f64..3.0, y0 in -3.0f64..-0.3, y1 in 0.3f64..3.0,
            fx in 0.2f64..0.8, fy in 0.2f64..0.8, h in 0.5f64..2.5, yaw in -0.7f64..0.7,
        ) {
            let xn = fx * x1;
            let yn = fy * y1;
            let mut l = LayoutModel::new(vec![[x0, y1], [xn, y1], [xn, yn], [x1, yn], [x1, y0], [x0, y0]], h);
            l.rotation = crate::geometry::RotationMatrix::from_axis_angle(&Vector3::z_axis(), yaw);
            let dims = Dims::panorama(24);
            let fast = render_labels(&l, dims).unwrap();
            let inv = l.rotation.inverse();
            let grid = RayGrid::new(dims);
            let mut differ = 0;
            for (k, r) in grid.rays().iter().enumerate() {
                if fast.labels()[k] != label_ray(&l, &(inv * r)) {
                    differ += 1;
                }
            }
            prop_assert_eq!(differ, 0);
        }

        #[test]
        fn eop_matches_brute_force(rows in 1usize..9, seed in proptest::collection::vec(label_strategy(), 256)) {
            let dims = Dims::panorama(rows);
            let a = LabeledImage::from_labels(dims, seed[..dims.len()].to_vec()).unwrap();
            let b = LabeledImage::from_labels(dims, seed[seed.len() - dims.len()..].to_vec()).unwrap();
            prop_assert_eq!(eop(&a, &b).unwrap(), brute_force_eop(&a, &b));
            prop_assert_eq!(eop(&a, &b).unwrap(), eop(&b, &a).unwrap());
            let labeled = a.labels().iter().filter(|&&l| l != Label::None).count();
            prop_assert_eq!(eop(&a, &a).unwrap(), labeled as f64 / dims.len() as f64);
        }
    }
}
