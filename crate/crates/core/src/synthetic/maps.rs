use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{Label, LabeledImage};
use crate::geometry::{coord_ray, Dims, UnitVec3};
use crate::lines::{GreatCircleSegment, VanishingBasis};
use crate::structural::{rasterize_arc, NormalMap, ProbabilityMap};

/// Edge probability map of a set of segments: each pixel gets
/// `exp(−d²/2σ²)` of its pixel distance `d` to the nearest rasterized
/// segment pixel, so segment pixels are exactly 1.
pub fn synth_edge_map(
    segments: &[GreatCircleSegment],
    dims: Dims,
    sigma_px: f64,
) -> Result<ProbabilityMap> {
    Dims::new(dims.rows, dims.cols)?;
    if !(sigma_px > 0.0) {
        return Err(Error::invalid("edge map sigma must be positive"));
    }
    let radius = (3.0 * sigma_px).ceil() as isize;
    let kernel: Vec<(isize, isize, f32)> = (-radius..=radius)
        .flat_map(|dr| (-radius..=radius).map(move |dc| (dr, dc)))
        .map(|(dr, dc)| {
            (
                dr,
                dc,
                (-((dr * dr + dc * dc) as f64) / (2.0 * sigma_px * sigma_px)).exp() as f32,
            )
        })
        .collect();
    let mut values = vec![0.0f32; dims.len()];
    for seg in segments {
        for (r, c) in rasterize_arc(seg, dims) {
            for &(dr, dc, w) in &kernel {
                let rr = r as isize + dr;
                if rr < 0 || rr >= dims.rows as isize {
                    continue;
                }
                let i = dims.index(rr as usize, dims.wrap_col(c as isize + dc));
                values[i] = values[i].max(w);
            }
        }
    }
    ProbabilityMap::new(dims, values)
}

/// How a synthetic normal map departs from the ground-truth labels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalNoise {
    /// Share of pixels corrupted.
    pub flip_rate: f64,
    /// Share of corrupted pixels given a wrong axis; the rest become nil.
    pub wrong_axis_share: f64,
    /// Extra nil rate on the ceiling, which normal networks see poorly.
    pub ceiling_nil_base: f64,
}

impl Default for NormalNoise {
    fn default() -> Self {
        NormalNoise {
            flip_rate: 0.0,
            wrong_axis_share: 2.0 / 3.0,
            ceiling_nil_base: 0.25,
        }
    }
}

impl NormalNoise {
    pub fn with_flip_rate(flip_rate: f64) -> Self {
        NormalNoise {
            flip_rate,
            ..Default::default()
        }
    }

    /// Nil probability on ceiling pixels before the generic corruption.
    pub fn ceiling_nil_rate(&self) -> f64 {
        (3.0 * self.flip_rate + self.ceiling_nil_base).min(0.9)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.flip_rate) && unit(self.wrong_axis_share) && unit(self.ceiling_nil_base)) {
            return Err(Error::invalid("normal noise rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Normal map derived from labels: each labeled pixel gets the vanishing
/// direction of its axis, then ceiling pixels are dropped at
/// [`NormalNoise::ceiling_nil_rate`] and any pixel is corrupted at
/// `flip_rate` (wrong axis or nil).
pub fn synth_normal_map(
    labels: &LabeledImage,
    basis: &VanishingBasis,
    noise: &NormalNoise,
    rng: &mut impl Rng,
) -> Result<NormalMap> {
    noise.validate()?;
    let dims = labels.dims();
    let ceiling_nil = noise.ceiling_nil_rate();
    let mut normals: Vec<Option<UnitVec3>> = Vec::with_capacity(dims.len());
    for (i, &label) in labels.labels().iter().enumerate() {
        let Some(k) = label.axis().index() else {
            normals.push(None);
            continue;
        };
        if label == Label::Z {
            let ray = coord_ray((i / dims.cols) as f64, (i % dims.cols) as f64, dims);
            if basis.to_local(&ray).z > 0.0 && rng.random::<f64>() < ceiling_nil {
                normals.push(None);
                continue;
            }
        }
        let mut axis = Some(k);
        if rng.random::<f64>() < noise.flip_rate {
            axis = if rng.random::<f64>() < noise.wrong_axis_share {
                Some((k + rng.random_range(1..3)) % 3)
            } else {
                None
            };
        }
        normals.push(axis.map(|a| basis.vp(a)));
    }
    NormalMap::new(dims, normals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::eop;
    use crate::lines::task_rng;
    use crate::structural::label_normals;
    use crate::synthetic::{generate_scene, SceneSpec};

    #[test]
    fn edge_map_peaks_on_segments() {
        let scene = generate_scene(&SceneSpec::unit_box(), Dims::panorama(64)).unwrap();
        let m = synth_edge_map(&scene.structural, Dims::panorama(64), 1.5).unwrap();
        for seg in &scene.structural {
            for (r, c) in rasterize_arc(seg, m.dims()) {
                assert_eq!(m.get(r, c), 1.0);
            }
        }
        assert!(m.values().iter().all(|v| (0.0..=1.0).contains(v)));
        // wall centres are far from any edge
        assert!(m.get(32, 32) < 0.01);
    }

    #[test]
    fn clean_normals_reproduce_labels_off_the_ceiling() {
        let dims = Dims::panorama(64);
        let scene = generate_scene(&SceneSpec::unit_box(), dims).unwrap();
        let basis = VanishingBasis::identity();
        let nm = synth_normal_map(
            &scene.labels,
            &basis,
            &NormalNoise::default(),
            &mut task_rng(0, 0),
        )
        .unwrap();
        let labeled = label_normals(&nm, &basis, 30.0);
        let agree = eop(&labeled, &scene.labels).unwrap();
        let f_gt = scene.labels.fractions();
        let f = labeled.fractions();
        assert!(f[2] < f_gt[2]);
        assert!((f[0] - f_gt[0]).abs() < 1e-12 && (f[1] - f_gt[1]).abs() < 1e-12);
        assert!(agree < 1.0 && agree > 0.8);
    }

    #[test]
    fn flip_rate_controls_agreement() {
        let dims = Dims::panorama(128);
        let scene = generate_scene(&SceneSpec::random(6, 0, 3).unwrap(), dims).unwrap();
        let basis = VanishingBasis::from_rotation(scene.layout.rotation);
        let nm = synth_normal_map(
            &scene.labels,
            &basis,
            &NormalNoise::with_flip_rate(0.1),
            &mut task_rng(1, 0),
        )
        .unwrap();
        let labeled = label_normals(&nm, &basis, 30.0);
        let (mut hit, mut total) = (0, 0);
        for (a, b) in labeled.labels().iter().zip(scene.labels.labels()) {
            if *a != Label::None {
                total += 1;
                hit += (a == b) as usize;
            }
        }
        let rate = hit as f64 / total as f64;
        assert!((0.85..=0.95).contains(&rate), "{rate}");
    }
}
