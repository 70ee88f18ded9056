use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;

use crate::corners::{CornerCandidate, Hemisphere};

const RETRIES: usize = 50;

/// Whether a group spans enough of the room to close a layout: corners in
/// at least three quadrants, both hemispheres present, and no two corners
/// of the same quadrant and hemisphere within `cluster_deg` of azimuth.
pub fn group_is_admissible(group: &[&CornerCandidate], cluster_deg: f64) -> bool {
    let quadrants: HashSet<_> = group.iter().map(|c| c.quadrant).collect();
    if quadrants.len() < 3 {
        return false;
    }
    let has = |h: Hemisphere| group.iter().any(|c| c.hemisphere == h);
    if !has(Hemisphere::Ceiling) || !has(Hemisphere::Floor) {
        return false;
    }
    let tol = cluster_deg.to_radians();
    for (i, a) in group.iter().enumerate() {
        for b in &group[i + 1..] {
            if a.quadrant == b.quadrant && a.hemisphere == b.hemisphere {
                let d = (a.azimuth() - b.azimuth()).abs();
                if d.min(std::f64::consts::TAU - d) <= tol {
                    return false;
                }
            }
        }
    }
    true
}

/// Draw `n` distinct candidates uniformly, retrying a bounded number of
/// times until the group is admissible. Returns candidate indices.
pub fn sample_corner_group(
    cands: &[CornerCandidate],
    n: usize,
    cluster_deg: f64,
    rng: &mut impl Rng,
) -> Option<Vec<usize>> {
    if n > cands.len() || n == 0 {
        return None;
    }
    let quadrants: HashSet<_> = cands.iter().map(|c| c.quadrant).collect();
    let hemispheres: HashSet<_> = cands.iter().map(|c| c.hemisphere).collect();
    if quadrants.len() < 3 || hemispheres.len() < 2 {
        return None;
    }
    for _ in 0..RETRIES {
        let mut idx = sample(rng, cands.len(), n).into_vec();
        idx.sort_unstable();
        let group: Vec<&CornerCandidate> = idx.iter().map(|&i| &cands[i]).collect();
        if group_is_admissible(&group, cluster_deg) {
            return Some(idx);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corners::classify_corner;
    use crate::lines::task_rng;
    use nalgebra::{Unit, Vector3};

    fn c(x: f64, y: f64, z: f64) -> CornerCandidate {
        let dir = Unit::new_normalize(Vector3::new(x, y, z));
        let (hemisphere, quadrant) = classify_corner(&dir).unwrap();
        CornerCandidate {
            dir,
            hemisphere,
            quadrant,
            parents: (0, 0),
            weight: 1.0,
        }
    }

    #[test]
    fn two_quadrants_always_reject() {
        let cands = vec![
            c(1.0, 1.0, 1.0),
            c(-1.0, 1.0, -1.0),
            c(1.0, 2.0, -1.0),
            c(-2.0, 1.0, 1.0),
        ];
        let mut rng = task_rng(0, 0);
        for _ in 0..20 {
            assert!(sample_corner_group(&cands, 3, 2.0, &mut rng).is_none());
        }
    }

    #[test]
    fn example_group_is_accepted() {
        let g = [c(-1.0, 1.0, 1.0), c(-1.0, -1.0, -1.0), c(1.0, -1.0, 1.0)];
        assert!(group_is_admissible(&g.iter().collect::<Vec<_>>(), 2.0));
        let mut rng = task_rng(0, 0);
        let idx = sample_corner_group(&g, 3, 2.0, &mut rng).unwrap();
        assert_eq!(idx, vec![0, 1, 2]);
    }

    #[test]
    fn ceiling_only_rejects() {
        let cands = vec![
            c(1.0, 1.0, 1.0),
            c(-1.0, 1.0, 1.0),
            c(-1.0, -1.0, 1.0),
            c(1.0, -1.0, 1.0),
        ];
        assert!(sample_corner_group(&cands, 3, 2.0, &mut task_rng(0, 0)).is_none());
    }

    #[test]
    fn near_duplicates_in_one_cluster_reject() {
        let g = [
            c(1.0, 1.0, 1.0),
            c(1.0, 1.01, 1.0),
            c(-1.0, -1.0, -1.0),
            c(1.0, -1.0, 1.0),
        ];
        assert!(!group_is_admissible(&g.iter().collect::<Vec<_>>(), 2.0));
    }
}
