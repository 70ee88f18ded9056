use super::{Axis, GreatCircleSegment, ThresholdConfig, VanishingBasis};
use crate::geometry::angle_to_circle;

/// Residual of each axis for one line: the angle between the line's great
/// circle and the vanishing direction.
pub fn axis_residuals(line: &GreatCircleSegment, basis: &VanishingBasis) -> [f64; 3] {
    [0, 1, 2].map(|k| angle_to_circle(&line.normal, &basis.vp(k)))
}

/// Label each line with the vanishing direction it passes through. Lines
/// passing through none are dropped; ties go to the smaller residual.
pub fn classify_lines(
    lines: &[GreatCircleSegment],
    basis: &VanishingBasis,
    cfg: &ThresholdConfig,
) -> Vec<GreatCircleSegment> {
    let theta = cfg.theta_th();
    lines
        .iter()
        .filter_map(|l| {
            let res = axis_residuals(l, basis);
            let (k, r) = res
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .map(|(k, r)| (k, *r))?;
            (r <= theta).then(|| l.clone().with_axis(Axis::from_index(k)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Vector3;

    #[test]
    fn line_perpendicular_to_vp_x_is_x() {
        // circle through (1,0,0): normal along y
        let seg = GreatCircleSegment::from_endpoints(
            &Vector3::new(1.0, 0.0, 0.3),
            &Vector3::new(1.0, 0.0, -0.2),
        )
        .unwrap();
        let out = classify_lines(
            &[seg],
            &VanishingBasis::identity(),
            &ThresholdConfig::default(),
        );
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].axis, Axis::X);
    }

    #[test]
    fn diagonal_line_is_dropped() {
        let n = Vector3::new(1.0, 1.0, 1.0).normalize();
        let a = n.cross(&Vector3::x()).normalize();
        let b = n.cross(&a);
        let seg = GreatCircleSegment::from_endpoints(&a, &b).unwrap();
        let out = classify_lines(
            &[seg],
            &VanishingBasis::identity(),
            &ThresholdConfig::default(),
        );
        assert!(out.is_empty());
    }

    #[test]
    fn residual_never_exceeds_threshold() {
        let cfg = ThresholdConfig::default();
        let basis = VanishingBasis::identity();
        let mut lines = Vec::new();
        for i in 0..200 {
            let t = i as f64 * 0.0007;
            let a = Vector3::new(1.0, t, 0.5);
            let b = Vector3::new(1.0, -t, -0.5);
            lines.push(GreatCircleSegment::from_endpoints(&a, &b).unwrap());
        }
        for l in classify_lines(&lines, &basis, &cfg) {
            let k = l.axis.index().unwrap();
            assert!(axis_residuals(&l, &basis)[k] <= cfg.theta_th());
        }
    }
}
