//! Random Manhattan rooms with exact ground truth, used as a test oracle
//! and for benchmarking.

mod maps;
mod render;

pub use maps::{synth_edge_map, synth_normal_map, NormalNoise};
pub use render::{face_at, render_panorama, Face, Shading};

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Label, LabeledImage};
use crate::geometry::{coord_ray, Dims, RotationMatrix, Vec3};
use crate::hypotheses::{validate_layout, LayoutModel};
use crate::lines::{task_rng, GreatCircleSegment, VanishingBasis};
use crate::pipeline::PipelineInputs;

/// Axis-aligned rectangle drawn on a wall (window, door, picture).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClutterRect {
    pub wall: usize,
    /// Fractions along the wall, from its first vertex.
    pub u: [f64; 2],
    /// Heights, between the floor `−h` and the ceiling `+1`.
    pub z: [f64; 2],
}

/// Everything needed to build a scene deterministically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    /// Clockwise ceiling polygon in the room frame.
    pub polygon: Vec<[f64; 2]>,
    pub h: f64,
    /// Camera rotation about the vertical, degrees.
    pub yaw_deg: f64,
    pub clutter: Vec<ClutterRect>,
    /// Angular noise applied to generated line segments, degrees.
    pub line_noise_deg: f64,
    /// Share of normal-map pixels corrupted.
    pub flip_rate: f64,
    pub seed: u64,
}

impl SceneSpec {
    /// Box `[-1, 1]²` with the floor one unit below the camera.
    pub fn unit_box() -> Self {
        SceneSpec {
            polygon: vec![[-1.0, 1.0], [1.0, 1.0], [1.0, -1.0], [-1.0, -1.0]],
            h: 1.0,
            yaw_deg: 0.0,
            clutter: Vec::new(),
            line_noise_deg: 0.0,
            flip_rate: 0.0,
            seed: 0,
        }
    }

    pub fn walls(&self) -> usize {
        self.polygon.len()
    }

    /// Random room with 4, 6 or 8 walls (box, L, or T/U/Z shapes) and
    /// `clutter` wall rectangles.
    pub fn random(walls: usize, clutter: usize, seed: u64) -> Result<Self> {
        Self::random_with(walls, seed, |_| clutter)
    }

    /// Random room with enough clutter for `ratio` clutter edges per
    /// visible structural edge.
    pub fn random_cluttered(walls: usize, ratio: f64, seed: u64) -> Result<Self> {
        if !(ratio >= 0.0 && ratio.is_finite()) {
            return Err(Error::invalid(
                "clutter ratio must be finite and non-negative",
            ));
        }
        Self::random_with(walls, seed, |poly| clutter_count(poly, ratio))
    }

    fn random_with(
        walls: usize,
        seed: u64,
        clutter: impl Fn(&[[f64; 2]]) -> usize,
    ) -> Result<Self> {
        if ![4, 6, 8].contains(&walls) {
            return Err(Error::invalid(format!(
                "wall count must be 4, 6 or 8, got {walls}"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..1000 {
            let polygon = random_polygon(walls, &mut rng);
            let h = rng.random_range(1.0..2.0);
            let layout = LayoutModel::new(polygon.clone(), h);
            if validate_layout(&layout, 1e-6).is_err() {
                continue;
            }
            let yaw_deg = rng.random_range(-40.0..40.0);
            let rects = random_clutter(&polygon, h, clutter(&polygon), &mut rng);
            return Ok(SceneSpec {
                polygon,
                h,
                yaw_deg,
                clutter: rects,
                line_noise_deg: 0.0,
                flip_rate: 0.0,
                seed,
            });
        }
        Err(Error::Generation("could not sample a valid room".into()))
    }

    pub fn rotation(&self) -> RotationMatrix {
        RotationMatrix::from_axis_angle(&Vector3::z_axis(), self.yaw_deg.to_radians())
    }

    pub fn layout(&self) -> LayoutModel {
        let mut l = LayoutModel::new(self.polygon.clone(), self.h);
        l.rotation = self.rotation();
        l
    }

    pub fn validate(&self) -> Result<()> {
        validate_layout(&LayoutModel::new(self.polygon.clone(), self.h), 1e-6)
            .map_err(|v| Error::invalid(format!("scene polygon: {v}")))?;
        if !(0.0..1.0).contains(&self.flip_rate) {
            return Err(Error::invalid("flip rate must be in [0, 1)"));
        }
        if !(self.line_noise_deg >= 0.0) {
            return Err(Error::invalid("line noise must be non-negative"));
        }
        for c in &self.clutter {
            let ok = c.wall < self.polygon.len()
                && 0.0 <= c.u[0]
                && c.u[0] < c.u[1]
                && c.u[1] <= 1.0
                && -self.h <= c.z[0]
                && c.z[0] < c.z[1]
                && c.z[1] <= 1.0;
            if !ok {
                return Err(Error::invalid("clutter rectangle outside its wall"));
            }
        }
        Ok(())
    }
}

fn extent(rng: &mut impl Rng) -> f64 {
    rng.random_range(1.2..3.5)
}

/// Rotate a polygon by `k` quarter turns (keeps it clockwise).
fn quarter_turns(poly: Vec<[f64; 2]>, k: usize) -> Vec<[f64; 2]> {
    poly.into_iter()
        .map(|p| match k % 4 {
            0 => p,
            1 => [-p[1], p[0]],
            2 => [-p[0], -p[1]],
            _ => [p[1], -p[0]],
        })
        .collect()
}

fn random_polygon(walls: usize, rng: &mut impl Rng) -> Vec<[f64; 2]> {
    let (x0, x1, y0, y1) = (-extent(rng), extent(rng), -extent(rng), extent(rng));
    let notch =
        |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.random_range(0.25..0.75);
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    let poly = match walls {
        4 => vec![[x0, y1], [x1, y1], [x1, y0], [x0, y0]],
        6 => {
            // L: the q1 corner cut away
            let xn = notch(&mut local, 0.3, x1 - 0.3);
            let yn = notch(&mut local, 0.3, y1 - 0.3);
            vec![[x0, y1], [xn, y1], [xn, yn], [x1, yn], [x1, y0], [x0, y0]]
        }
        _ => match local.random_range(0..3) {
            0 => {
                // T: both upper corners cut away
                let xa = notch(&mut local, x0 + 0.3, -0.3);
                let xb = notch(&mut local, 0.3, x1 - 0.3);
                let ya = notch(&mut local, 0.3, y1 - 0.3);
                let yb = notch(&mut local, 0.3, y1 - 0.3);
                vec![
                    [x0, ya],
                    [xa, ya],
                    [xa, y1],
                    [xb, y1],
                    [xb, yb],
                    [x1, yb],
                    [x1, y0],
                    [x0, y0],
                ]
            }
            1 => {
                // Z: opposite corners cut away
                let xa = notch(&mut local, 0.3, x1 - 0.3);
                let ya = notch(&mut local, 0.3, y1 - 0.3);
                let xb = notch(&mut local, x0 + 0.3, -0.3);
                let yb = notch(&mut local, y0 + 0.3, -0.3);
                vec![
                    [x0, y1],
                    [xa, y1],
                    [xa, ya],
                    [x1, ya],
                    [x1, y0],
                    [xb, y0],
                    [xb, yb],
                    [x0, yb],
                ]
            }
            _ => {
                // U: a notch cut into the middle of the upper wall
                let xa = notch(&mut local, x0 + 0.3, -0.3);
                let xb = notch(&mut local, 0.3, x1 - 0.3);
                let yc = notch(&mut local, 0.3, y1 - 0.3);
                vec![
                    [x0, y1],
                    [xa, y1],
                    [xa, yc],
                    [xb, yc],
                    [xb, y1],
                    [x1, y1],
                    [x1, y0],
                    [x0, y0],
                ]
            }
        },
    };
    quarter_turns(poly, local.random_range(0..4))
}

/// Longest run of wall `wall` seen from the camera, as fractions along
/// it. Walls span floor to ceiling, so visibility is decided in plan.
pub fn visible_span(polygon: &[[f64; 2]], wall: usize) -> Option<[f64; 2]> {
    const STEPS: usize = 200;
    let (a, b) = (polygon[wall], polygon[(wall + 1) % polygon.len()]);
    let seen = |k: usize| {
        let u = (k as f64 + 0.5) / STEPS as f64;
        let v = Vec3::new(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), 0.0);
        matches!(face_at(polygon, 1.0, &v), Some((Face::Wall(j), _)) if j == wall)
    };
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for k in 0..=STEPS {
        match (k < STEPS && seen(k), start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| k - s > be - bs) {
                    best = Some((s, k));
                }
                start = None;
            }
            _ => {}
        }
    }
    best.map(|(s, e)| [s as f64 / STEPS as f64, e as f64 / STEPS as f64])
}

/// Structural edges the camera sees at least partly: ceiling and floor
/// edges of walls with a visible span, and vertical edges at unoccluded
/// vertices.
pub fn visible_structural_edges(polygon: &[[f64; 2]]) -> usize {
    let n = polygon.len();
    let walls = (0..n)
        .filter(|&i| visible_span(polygon, i).is_some_and(|s| s[1] - s[0] >= 0.1))
        .count();
    let vertices = polygon
        .iter()
        .filter(|p| {
            face_at(polygon, 1.0, &Vec3::new(p[0], p[1], 0.0)).is_some_and(|(_, t)| t >= 1.0 - 1e-9)
        })
        .count();
    2 * walls + vertices
}

/// Clutter rectangles (four edges each) needed for `ratio` clutter edges
/// per visible structural edge, rounded up.
pub fn clutter_count(polygon: &[[f64; 2]], ratio: f64) -> usize {
    (ratio * visible_structural_edges(polygon) as f64 / 4.0).ceil() as usize
}

/// Narrowest azimuth slot a clutter rectangle is given, degrees. Keeps
/// rectangle edges long enough for the line detector.
const MIN_SLOT_DEG: f64 = 24.0;

/// Fraction along the wall `a → b` seen at azimuth `phi`.
fn u_at_azimuth(a: [f64; 2], b: [f64; 2], phi: f64) -> f64 {
    let d = [phi.cos(), phi.sin()];
    let e = [b[0] - a[0], b[1] - a[1]];
    (d[0] * a[1] - d[1] * a[0]) / (e[0] * d[1] - e[1] * d[0])
}

/// `count` rectangles on the visible parts of the walls. Each visible span
/// is cut into slots of equal azimuth, at least [`MIN_SLOT_DEG`] wide, in
/// one or two rows; rectangles fill slots round-robin over the walls.
/// Fewer than `count` come back when the room has too few slots.
fn random_clutter(
    polygon: &[[f64; 2]],
    h: f64,
    count: usize,
    rng: &mut impl Rng,
) -> Vec<ClutterRect> {
    let walls = polygon.len();
    let first = rng.random_range(0..walls);
    if count == 0 {
        return Vec::new();
    }
    struct Span {
        wall: usize,
        a: [f64; 2],
        b: [f64; 2],
        phi: [f64; 2],
        slots: usize,
    }
    let spans: Vec<Span> = (0..walls)
        .filter_map(|w| {
            let [s0, s1] = visible_span(polygon, w)?;
            let (a, b) = (polygon[w], polygon[(w + 1) % walls]);
            let at = |u: f64| (a[1] + u * (b[1] - a[1])).atan2(a[0] + u * (b[0] - a[0]));
            let (p0, mut p1) = (at(s0), at(s1));
            // clockwise polygon seen from inside: azimuth decreases along a wall
            if p1 > p0 {
                p1 -= std::f64::consts::TAU;
            }
            let slots = (0.9 * (p0 - p1).to_degrees() / MIN_SLOT_DEG).floor() as usize;
            (slots > 0).then_some(Span {
                wall: w,
                a,
                b,
                phi: [p0, p1],
                slots,
            })
        })
        .collect();
    let capacity: usize = spans.iter().map(|s| s.slots).sum();
    if capacity == 0 {
        return Vec::new();
    }
    let rows = if capacity >= count { 1 } else { 2 };
    let mut used = vec![0usize; spans.len()];
    let mut order = Vec::with_capacity(count);
    let mut k = first;
    while order.len() < count.min(rows * capacity) {
        let j = k % spans.len();
        if used[j] < rows * spans[j].slots {
            order.push((j, used[j]));
            used[j] += 1;
        }
        k += 1;
    }
    // lower and upper bands when stacking
    let mid = 0.5 * (1.0 - h);
    let bands = if rows == 1 {
        vec![[-0.9 * h, 0.9]]
    } else {
        vec![
            [-0.9 * h, mid - 0.05 * (1.0 + h)],
            [mid + 0.05 * (1.0 + h), 0.9],
        ]
    };
    let mut out = Vec::with_capacity(order.len());
    for (j, n) in order {
        let sp = &spans[j];
        let (slot, row) = (n % sp.slots, n / sp.slots);
        let inner = 0.9 * (sp.phi[1] - sp.phi[0]);
        let width = inner / sp.slots as f64;
        let lo = sp.phi[0] + 0.05 * (sp.phi[1] - sp.phi[0]) + slot as f64 * width;
        let w = width * rng.random_range(0.6..0.85);
        let start = lo + rng.random_range(0.0..1.0) * (width - w);
        let (ua, ub) = (
            u_at_azimuth(sp.a, sp.b, start),
            u_at_azimuth(sp.a, sp.b, start + w),
        );
        let [z0, z1] = bands[row.min(bands.len() - 1)];
        let height = (z1 - z0) * rng.random_range(0.6..0.9);
        let bottom = z0 + rng.random_range(0.0..1.0) * (z1 - z0 - height);
        out.push(ClutterRect {
            wall: sp.wall,
            u: [ua.min(ub).clamp(0.0, 1.0), ua.max(ub).clamp(0.0, 1.0)],
            z: [bottom, bottom + height],
        });
    }
    out
}

/// A generated room with its ground truth.
#[derive(Debug, Clone)]
pub struct Scene {
    pub spec: SceneSpec,
    /// Ground-truth layout in the panorama frame.
    pub layout: LayoutModel,
    pub labels: LabeledImage,
    /// Every room edge (ceiling, floor, vertical) as a great-circle segment.
    pub structural: Vec<GreatCircleSegment>,
    pub clutter: Vec<GreatCircleSegment>,
    /// Room corners in the panorama frame (ceiling ring then floor ring).
    pub corners: Vec<Vec3>,
}

/// 3D endpoints of every edge of the room prism, in the room frame.
pub fn room_edges(polygon: &[[f64; 2]], h: f64) -> Vec<(Vec3, Vec3)> {
    let n = polygon.len();
    let p = |i: usize, z: f64| Vec3::new(polygon[i % n][0], polygon[i % n][1], z);
    let mut out = Vec::with_capacity(3 * n);
    for z in [1.0, -h] {
        for i in 0..n {
            out.push((p(i, z), p(i + 1, z)));
        }
    }
    for i in 0..n {
        out.push((p(i, 1.0), p(i, -h)));
    }
    out
}

/// 3D endpoints of the four sides of every clutter rectangle.
pub fn clutter_edges(spec: &SceneSpec) -> Vec<(Vec3, Vec3)> {
    let n = spec.polygon.len();
    let mut out = Vec::new();
    for c in &spec.clutter {
        let (a, b) = (spec.polygon[c.wall], spec.polygon[(c.wall + 1) % n]);
        let at = |u: f64, z: f64| Vec3::new(a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1]), z);
        let corners = [
            at(c.u[0], c.z[0]),
            at(c.u[1], c.z[0]),
            at(c.u[1], c.z[1]),
            at(c.u[0], c.z[1]),
        ];
        for i in 0..4 {
            out.push((corners[i], corners[(i + 1) % 4]));
        }
    }
    out
}

fn perturb(v: Vec3, sigma: f64, rng: &mut impl Rng) -> Vec3 {
    if sigma == 0.0 {
        return v;
    }
    let t1 = v.cross(&Vec3::new(0.3, 0.5, 0.8)).normalize();
    let t2 = v.normalize().cross(&t1);
    let mut gauss = || {
        let (u1, u2): (f64, f64) = (rng.random::<f64>().max(1e-300), rng.random());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let norm = v.norm();
    (v / norm + t1 * sigma * gauss() + t2 * sigma * gauss()).normalize() * norm
}

fn to_segments(
    edges: &[(Vec3, Vec3)],
    r: &RotationMatrix,
    sigma: f64,
    rng: &mut impl Rng,
) -> Vec<GreatCircleSegment> {
    edges
        .iter()
        .filter_map(|(a, b)| {
            let (a, b) = (perturb(r * a, sigma, rng), perturb(r * b, sigma, rng));
            GreatCircleSegment::from_endpoints(&a, &b).ok()
        })
        .collect()
}

/// Ground-truth labels by direct per-face intersection: every face the
/// ray hits is tested and the nearest wins.
pub fn ground_truth_labels(spec: &SceneSpec, dims: Dims) -> LabeledImage {
    let inv = spec.rotation().inverse();
    let labels = (0..dims.len())
        .map(|i| {
            let ray = inv * coord_ray((i / dims.cols) as f64, (i % dims.cols) as f64, dims);
            match face_at(&spec.polygon, spec.h, &ray) {
                Some((Face::Ceiling | Face::Floor, _)) => Label::Z,
                Some((Face::Wall(w), _)) => {
                    let n = spec.polygon.len();
                    let (a, b) = (spec.polygon[w], spec.polygon[(w + 1) % n]);
                    if (b[0] - a[0]).abs() >= (b[1] - a[1]).abs() {
                        Label::Y
                    } else {
                        Label::X
                    }
                }
                None => Label::None,
            }
        })
        .collect();
    LabeledImage::from_labels(dims, labels).expect("sizes match")
}

/// Build the scene: ground-truth layout and labels, and the structural and
/// clutter segments as seen from the camera (with `line_noise_deg` noise
/// on their endpoints).
pub fn generate_scene(spec: &SceneSpec, dims: Dims) -> Result<Scene> {
    spec.validate()?;
    Dims::new(dims.rows, dims.cols)?;
    let r = spec.rotation();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let sigma = spec.line_noise_deg.to_radians();
    let structural = to_segments(&room_edges(&spec.polygon, spec.h), &r, sigma, &mut rng);
    let clutter = to_segments(&clutter_edges(spec), &r, sigma, &mut rng);
    let corners = [1.0, -spec.h]
        .iter()
        .flat_map(|&z| spec.polygon.iter().map(move |p| Vec3::new(p[0], p[1], z)))
        .map(|p| r * p)
        .collect();
    Ok(Scene {
        spec: spec.clone(),
        layout: spec.layout(),
        labels: ground_truth_labels(spec, dims),
        structural,
        clutter,
        corners,
    })
}

/// Edge-map blur used for synthetic scenes, in panorama pixels.
pub const DEFAULT_EDGE_SIGMA_PX: f64 = 2.0;

/// Every pipeline input of a scene at `rows × 2·rows`: shaded panorama,
/// oracle edge map, noisy normal map and ground-truth labels.
pub fn synthetic_inputs(
    spec: &SceneSpec,
    rows: usize,
    edge_sigma_px: f64,
) -> Result<PipelineInputs> {
    let dims = Dims::new(rows, 2 * rows)?;
    let scene = generate_scene(spec, dims)?;
    let basis = VanishingBasis::from_rotation(scene.layout.rotation);
    let noise = NormalNoise::with_flip_rate(spec.flip_rate);
    Ok(PipelineInputs {
        panorama: render_panorama(spec, dims, &Shading::default())?,
        edge_map: Some(synth_edge_map(&scene.structural, dims, edge_sigma_px)?),
        normal_map: Some(synth_normal_map(
            &scene.labels,
            &basis,
            &noise,
            &mut task_rng(spec.seed, 1),
        )?),
        gt: Some(scene.labels),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{eop, render_labels};

    #[test]
    fn unit_box_combinatorics() {
        let scene = generate_scene(&SceneSpec::unit_box(), Dims::panorama(32)).unwrap();
        assert_eq!(scene.structural.len(), 12);
        assert_eq!(scene.corners.len(), 8);
        assert!(scene.clutter.is_empty());
    }

    #[test]
    fn random_rooms_are_valid_and_fully_labeled() {
        for walls in [4, 6, 8] {
            for seed in 0..5 {
                let spec = SceneSpec::random(walls, 3, seed).unwrap();
                assert_eq!(spec.walls(), walls);
                spec.validate().unwrap();
                let scene = generate_scene(&spec, Dims::panorama(64)).unwrap();
                let f = scene.labels.fractions();
                assert!(
                    f.iter().all(|&x| x > 0.0),
                    "{walls} walls seed {seed}: {f:?}"
                );
                assert!(scene.labels.labels().iter().all(|&l| l != Label::None));
                assert_eq!(scene.structural.len(), 3 * walls);
                assert_eq!(scene.clutter.len(), 12);
            }
        }
    }

    #[test]
    fn generator_is_deterministic() {
        let a = SceneSpec::random(8, 4, 17).unwrap();
        let b = SceneSpec::random(8, 4, 17).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, SceneSpec::random(8, 4, 18).unwrap());
    }

    #[test]
    fn rasterizers_agree() {
        let dims = Dims::panorama(128);
        for (walls, seed) in [(4, 1), (6, 2), (8, 3)] {
            let scene = generate_scene(&SceneSpec::random(walls, 0, seed).unwrap(), dims).unwrap();
            let ours = render_labels(&scene.layout, dims).unwrap();
            assert!(eop(&ours, &scene.labels).unwrap() >= 0.999);
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = SceneSpec::unit_box();
        s.polygon.reverse();
        assert!(s.validate().is_err());
        assert!(SceneSpec::random(5, 0, 0).is_err());
        let mut s = SceneSpec::unit_box();
        s.flip_rate = 1.0;
        assert!(s.validate().is_err());
    }
}
