use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SceneSpec;
use crate::error::Result;
use crate::geometry::{coord_ray, Dims, EquirectImage, Vec3};
use crate::hypotheses::point_in_polygon;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Face {
    Ceiling,
    Floor,
    /// Wall from polygon vertex `i` to `i + 1`.
    Wall(usize),
}

/// Nearest face hit by a ray from the camera (room frame), with its
/// distance along the ray.
pub fn face_at(polygon: &[[f64; 2]], h: f64, v: &Vec3) -> Option<(Face, f64)> {
    let mut best: Option<(Face, f64)> = None;
    let mut offer = |f: Face, t: f64| {
        if t > 0.0 && best.is_none_or(|(_, b)| t < b) {
            best = Some((f, t));
        }
    };
    for (face, plane) in [(Face::Ceiling, 1.0), (Face::Floor, -h)] {
        if v.z * plane > 0.0 {
            let t = plane / v.z;
            if point_in_polygon(polygon, [t * v.x, t * v.y]) {
                offer(face, t);
            }
        }
    }
    let n = polygon.len();
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        let e = [b[0] - a[0], b[1] - a[1]];
        let denom = v.x * e[1] - v.y * e[0];
        if denom.abs() < 1e-15 {
            continue;
        }
        let t = (a[0] * e[1] - a[1] * e[0]) / denom;
        let s = (a[0] * v.y - a[1] * v.x) / denom;
        let z = t * v.z;
        if (0.0..=1.0).contains(&s) && (-h..=1.0).contains(&z) {
            offer(Face::Wall(i), t);
        }
    }
    best
}

/// Grey levels of the rendered room, in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Shading {
    pub ceiling: f32,
    pub floor: f32,
    /// Wall tones; neighbouring walls never share one.
    pub walls: Vec<f32>,
    /// Tone offset of clutter rectangles from their wall.
    pub clutter_offset: f32,
    /// Samples per pixel side.
    pub supersample: usize,
}

impl Default for Shading {
    fn default() -> Self {
        Shading {
            ceiling: 250.0 / 255.0,
            floor: 10.0 / 255.0,
            walls: [60.0, 105.0, 150.0, 195.0]
                .iter()
                .map(|v| v / 255.0)
                .collect(),
            clutter_offset: 50.0 / 255.0,
            supersample: 3,
        }
    }
}

/// Walls that touch in the image: polygon neighbours plus any pair seen
/// side by side on a coarse face-id raster (occlusion boundaries).
fn wall_adjacency(spec: &SceneSpec) -> Vec<Vec<usize>> {
    let n = spec.polygon.len();
    let mut adj = vec![Vec::new(); n];
    let mut link = |a: usize, b: usize| {
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    };
    for i in 0..n {
        link(i, (i + 1) % n);
    }
    let dims = Dims::panorama(128);
    let inv = spec.rotation().inverse();
    let ids: Vec<Option<usize>> = (0..dims.len())
        .map(|i| {
            match face_at(
                &spec.polygon,
                spec.h,
                &(inv * coord_ray((i / dims.cols) as f64, (i % dims.cols) as f64, dims)),
            ) {
                Some((Face::Wall(w), _)) => Some(w),
                _ => None,
            }
        })
        .collect();
    for r in 0..dims.rows {
        for c in 0..dims.cols {
            if let (Some(a), Some(b)) = (
                ids[dims.index(r, c)],
                ids[dims.index(r, (c + 1) % dims.cols)],
            ) {
                link(a, b);
            }
        }
    }
    adj
}

/// Backtracking colouring of the wall graph with `k` tones, falling back
/// to `i mod k` when none exists.
fn colour_walls(adj: &[Vec<usize>], k: usize) -> Vec<usize> {
    fn go(i: usize, adj: &[Vec<usize>], k: usize, out: &mut Vec<usize>) -> bool {
        if i == adj.len() {
            return true;
        }
        for c in 0..k {
            if adj[i].iter().all(|&j| j >= i || out[j] != c) {
                out[i] = c;
                if go(i + 1, adj, k, out) {
                    return true;
                }
            }
        }
        false
    }
    let mut out = vec![0; adj.len()];
    if go(0, adj, k, &mut out) {
        out
    } else {
        (0..adj.len()).map(|i| i % k).collect()
    }
}

/// Shaded single-channel panorama of the room with its clutter rectangles.
pub fn render_panorama(spec: &SceneSpec, dims: Dims, shading: &Shading) -> Result<EquirectImage> {
    spec.validate()?;
    Dims::new(dims.rows, dims.cols)?;
    let k = shading.walls.len().max(1);
    let tones = colour_walls(&wall_adjacency(spec), k);
    let wall_tone = |w: usize| shading.walls.get(tones[w]).copied().unwrap_or(0.5);
    let inv = spec.rotation().inverse();
    let n = spec.polygon.len();
    let ss = shading.supersample.max(1);
    let shade = |v: &Vec3| -> f32 {
        match face_at(&spec.polygon, spec.h, v) {
            Some((Face::Ceiling, _)) => shading.ceiling,
            Some((Face::Floor, _)) => shading.floor,
            Some((Face::Wall(w), t)) => {
                let base = wall_tone(w);
                let (a, b) = (spec.polygon[w], spec.polygon[(w + 1) % n]);
                let p = [t * v.x, t * v.y];
                let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
                let u = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / len2;
                let z = t * v.z;
                let inside = spec.clutter.iter().any(|c| {
                    c.wall == w && (c.u[0]..=c.u[1]).contains(&u) && (c.z[0]..=c.z[1]).contains(&z)
                });
                if inside {
                    if base + shading.clutter_offset <= 1.0 {
                        base + shading.clutter_offset
                    } else {
                        base - shading.clutter_offset
                    }
                } else {
                    base
                }
            }
            None => 0.0,
        }
    };
    let data: Vec<f32> = (0..dims.rows)
        .into_par_iter()
        .flat_map_iter(|r| {
            let shade = &shade;
            let inv = &inv;
            (0..dims.cols).map(move |c| {
                let mut acc = 0.0f32;
                for i in 0..ss {
                    for j in 0..ss {
                        let dr = (i as f64 + 0.5) / ss as f64 - 0.5;
                        let dc = (j as f64 + 0.5) / ss as f64 - 0.5;
                        acc += shade(&(inv * coord_ray(r as f64 + dr, c as f64 + dc, dims)));
                    }
                }
                acc / (ss * ss) as f32
            })
        })
        .collect();
    EquirectImage::new(dims, 1, data)
}
