use std::collections::{HashMap, VecDeque};

use rand::Rng;

use super::fit::ransac_great_circle;
use super::{EdgeMap, ThresholdConfig};
use crate::geometry::{coord_ray, Dims, PixelCoord, UnitVec3};
use nalgebra::Unit;

/// A connected set of edge pixels and their rays.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeGroup {
    /// Sub-pixel edge positions.
    pub pixels: Vec<PixelCoord>,
    pub rays: Vec<UnitVec3>,
    /// Integer pixel each entry came from.
    pub cells: Vec<(usize, usize)>,
    pub dims: Dims,
}

impl EdgeGroup {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    fn subset(&self, idx: &[usize]) -> EdgeGroup {
        EdgeGroup {
            pixels: idx.iter().map(|&i| self.pixels[i]).collect(),
            rays: idx.iter().map(|&i| self.rays[i]).collect(),
            cells: idx.iter().map(|&i| self.cells[i]).collect(),
            dims: self.dims,
        }
    }
}

/// 8-connected components of the edge raster, wrapping across the azimuth
/// seam. Components smaller than `min_size` are dropped.
pub fn cluster_edge_groups(edges: &EdgeMap, min_size: usize) -> Vec<EdgeGroup> {
    let dims = edges.dims;
    let mut seen = vec![false; dims.len()];
    let mut groups = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..dims.len() {
        if !edges.mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut members = Vec::new();
        while let Some(i) = queue.pop_front() {
            members.push(i);
            let (r, c) = ((i / dims.cols) as isize, (i % dims.cols) as isize);
            for dr in -1..=1isize {
                let rr = r + dr;
                if rr < 0 || rr >= dims.rows as isize {
                    continue;
                }
                for dc in -1..=1isize {
                    let j = dims.index(rr as usize, dims.wrap_col(c + dc));
                    if edges.mask[j] && !seen[j] {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                }
            }
        }
        if members.len() < min_size {
            continue;
        }
        members.sort_unstable();
        let mut g = EdgeGroup {
            pixels: Vec::with_capacity(members.len()),
            rays: Vec::with_capacity(members.len()),
            cells: Vec::with_capacity(members.len()),
            dims,
        };
        for i in members {
            let (r, c) = (i / dims.cols, i % dims.cols);
            let (dr, dc) = edges.offsets[i];
            let p = PixelCoord::new(r as f64 + dr as f64, c as f64 + dc as f64);
            g.pixels.push(p);
            g.rays
                .push(Unit::new_normalize(coord_ray(p.row, p.col, dims)));
            g.cells.push((r, c));
        }
        groups.push(g);
    }
    groups
}

/// Split a contour into straight pieces. A contour running along a wall
/// and then up a corner is one connected component but two lines, so
/// great circles are peeled off one at a time, keeping only the largest
/// contiguous run of inliers each round.
pub fn split_edge_group(
    g: &EdgeGroup,
    cfg: &ThresholdConfig,
    min_size: usize,
    rng: &mut impl Rng,
) -> Vec<EdgeGroup> {
    let mut remaining: Vec<usize> = (0..g.len()).collect();
    let mut out = Vec::new();
    while remaining.len() >= min_size.max(2) {
        let rays: Vec<_> = remaining.iter().map(|&i| g.rays[i].into_inner()).collect();
        let Some((_, inliers)) = ransac_great_circle(&rays, cfg, rng) else {
            break;
        };
        let cells: Vec<(usize, usize)> = inliers.iter().map(|&k| g.cells[remaining[k]]).collect();
        let run = largest_run(&cells, cfg.run_gap_px.max(1), g.dims.cols);
        if run.len() < min_size {
            break;
        }
        let picked: Vec<usize> = run.iter().map(|&k| remaining[inliers[k]]).collect();
        let mut taken = vec![false; g.len()];
        for &i in &picked {
            taken[i] = true;
        }
        let mut sorted = picked;
        sorted.sort_unstable();
        out.push(g.subset(&sorted));
        remaining.retain(|&i| !taken[i]);
    }
    out
}

/// Indices (into `cells`) of the largest set connected under Chebyshev
/// distance `gap`, with columns wrapping at `cols`.
fn largest_run(cells: &[(usize, usize)], gap: usize, cols: usize) -> Vec<usize> {
    let lookup: HashMap<(usize, usize), usize> =
        cells.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let cols = cols.max(1) as isize;
    let g = gap as isize;
    let mut seen = vec![false; cells.len()];
    let mut best: Vec<usize> = Vec::new();
    for start in 0..cells.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut comp = vec![start];
        let mut k = 0;
        while k < comp.len() {
            let (r, c) = cells[comp[k]];
            k += 1;
            for dr in -g..=g {
                let rr = r as isize + dr;
                if rr < 0 {
                    continue;
                }
                for dc in -g..=g {
                    let cc = (c as isize + dc).rem_euclid(cols) as usize;
                    if let Some(&j) = lookup.get(&(rr as usize, cc)) {
                        if !seen[j] {
                            seen[j] = true;
                            comp.push(j);
                        }
                    }
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lines::task_rng;

    fn map_from(dims: Dims, on: &[(usize, usize)]) -> EdgeMap {
        let mut m = EdgeMap::empty(dims);
        for &(r, c) in on {
            m.mask[dims.index(r, c)] = true;
        }
        m
    }

    #[test]
    fn two_disjoint_arcs_are_two_groups() {
        let dims = Dims::panorama(64);
        let mut on: Vec<_> = (10..50).map(|c| (20, c)).collect();
        on.extend((70..110).map(|c| (40, c)));
        let groups = cluster_edge_groups(&map_from(dims, &on), 30);
        assert_eq!(groups.len(), 2);
        assert!(groups.iter().all(|g| g.len() == 40));
    }

    #[test]
    fn seam_crossing_arc_is_one_group() {
        let dims = Dims::panorama(64);
        let mut on: Vec<_> = (108..128).map(|c| (30, c)).collect();
        on.extend((0..20).map(|c| (30, c)));
        let groups = cluster_edge_groups(&map_from(dims, &on), 30);
        assert_eq!(groups.len(), 1);
        assert_eq!(groups[0].len(), 40);
    }

    #[test]
    fn small_blob_is_dropped() {
        let dims = Dims::panorama(64);
        let groups = cluster_edge_groups(&map_from(dims, &[(5, 5), (5, 6), (6, 6)]), 30);
        assert!(groups.is_empty());
    }

    #[test]
    fn l_shaped_contour_splits_into_two_lines() {
        let dims = Dims::panorama(128);
        // the horizon (a great circle) joined to a meridian (another one)
        let mut on: Vec<_> = (100..160).map(|c| (64, c)).collect();
        on.extend((20..64).map(|r| (r, 100)));
        let groups = cluster_edge_groups(&map_from(dims, &on), 30);
        assert_eq!(groups.len(), 1);
        let cfg = ThresholdConfig::default();
        let parts = split_edge_group(&groups[0], &cfg, 30, &mut task_rng(1, 0));
        assert_eq!(
            parts.len(),
            2,
            "{:?}",
            parts.iter().map(|p| p.len()).collect::<Vec<_>>()
        );
        let total: usize = parts.iter().map(|p| p.len()).sum();
        assert!(total >= 100);
    }
}
