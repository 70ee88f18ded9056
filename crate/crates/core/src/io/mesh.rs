//! Wavefront OBJ export of a layout.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::hypotheses::{check_layout, LayoutModel};

use super::json::{write_json, LayoutDoc};

/// Vertices and polygonal faces (0-based indices) of the room prism, in
/// the Manhattan frame. Faces are wound to face the camera inside.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<[f64; 3]>,
    pub faces: Vec<Vec<usize>>,
}

pub fn layout_mesh(layout: &LayoutModel) -> Mesh {
    let n = layout.polygon.len();
    let mut vertices = Vec::with_capacity(2 * n);
    for z in [1.0, -layout.h] {
        vertices.extend(layout.polygon.iter().map(|p| [p[0], p[1], z]));
    }
    let mut faces = Vec::with_capacity(n + 2);
    for i in 0..n {
        let j = (i + 1) % n;
        faces.push(vec![i, n + i, n + j, j]);
    }
    // the polygon is clockwise from above: as listed it faces down into the room
    faces.push((0..n).collect());
    faces.push((n..2 * n).rev().collect());
    Mesh { vertices, faces }
}

pub fn to_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v[0], v[1], v[2]);
    }
    for f in &mesh.faces {
        let idx: Vec<String> = f.iter().map(|i| (i + 1).to_string()).collect();
        let _ = writeln!(s, "f {}", idx.join(" "));
    }
    s
}

/// Parse the `v` and `f` records of an OBJ file.
pub fn parse_obj(text: &str) -> Result<Mesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let bad = || Error::Format(format!("obj line {}: {line}", no + 1));
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .map(|t| t.parse().map_err(|_| bad()))
                    .collect::<Result<_>>()?;
                if c.len() != 3 {
                    return Err(bad());
                }
                vertices.push([c[0], c[1], c[2]]);
            }
            Some("f") => {
                let f: Vec<usize> = it
                    .map(|t| {
                        t.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<usize>()
                            .map_err(|_| bad())
                    })
                    .collect::<Result<_>>()?;
                if f.len() < 3 || f.iter().any(|&i| i == 0 || i > vertices.len()) {
                    return Err(bad());
                }
                faces.push(f.into_iter().map(|i| i - 1).collect());
            }
            _ => {}
        }
    }
    Ok(Mesh { vertices, faces })
}

/// Whether every edge is used by exactly two faces, once in each direction.
pub fn is_closed(mesh: &Mesh) -> bool {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
    for f in &mesh.faces {
        for k in 0..f.len() {
            *directed.entry((f[k], f[(k + 1) % f.len()])).or_default() += 1;
        }
    }
    directed
        .iter()
        .all(|(&(a, b), &count)| count == 1 && directed.get(&(b, a)) == Some(&1))
}

/// Write `<stem>.json` and `<stem>.obj` into `dir`; returns both paths.
pub fn export_model(layout: &LayoutModel, dir: &Path, stem: &str) -> Result<(PathBuf, PathBuf)> {
    check_layout(layout, 5.0)?;
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let json = dir.join(format!("{stem}.json"));
    let obj = dir.join(format!("{stem}.obj"));
    write_json(
        &LayoutDoc {
            layout: layout.clone(),
            score: None,
        },
        &json,
    )?;
    std::fs::write(&obj, to_obj(&layout_mesh(layout))).map_err(|source| Error::Io {
        path: obj.clone(),
        source,
    })?;
    Ok((json, obj))
}
