use super::{CoordError, CoordinateMap2D, TransformMethod};
use crate::ingest::ElectrodeMontage;

const ANTIPODAL_TOL: f64 = 1e-9;

/// Drop the z component.
pub fn parallel_projection(m: &ElectrodeMontage) -> CoordinateMap2D {
    CoordinateMap2D {
        labels: m.labels.clone(),
        coords2d: m.coords3d.iter().map(|&[x, y, _]| [x, y]).collect(),
        method: TransformMethod::Parallel,
    }
}

/// Azimuthal equidistant projection centered on +z: each electrode lands at
/// distance θ (its angle from the vertex, radians) along its azimuth.
pub fn azimuthal_equidistant(m: &ElectrodeMontage) -> Result<CoordinateMap2D, CoordError> {
    let coords2d = m
        .labels
        .iter()
        .zip(&m.coords3d)
        .map(|(label, &[x, y, z])| {
            let r = (x * x + y * y + z * z).sqrt();
            let (ux, uy, uz) = (x / r, y / r, z / r);
            let theta = uz.clamp(-1.0, 1.0).acos();
            if std::f64::consts::PI - theta < ANTIPODAL_TOL {
                return Err(CoordError::AntipodalPoint { label: label.clone() });
            }
            let phi = uy.atan2(ux);
            Ok([theta * phi.cos(), theta * phi.sin()])
        })
        .collect::<Result<_, _>>()?;
    Ok(CoordinateMap2D { labels: m.labels.clone(), coords2d, method: TransformMethod::Azimuthal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn montage(points: &[[f64; 3]]) -> ElectrodeMontage {
        ElectrodeMontage::new((0..points.len()).map(|i| format!("E{i}")).collect(), points.to_vec()).unwrap()
    }

    #[test]
    fn parallel_drops_z() {
        let m = montage(&[[0.0, 0.0, 1.0], [0.3, -0.4, 0.7], [0.6, 0.8, 0.0]]);
        let out = parallel_projection(&m);
        assert_eq!(out.coords2d, vec![[0.0, 0.0], [0.3, -0.4], [0.6, 0.8]]);
    }

    #[test]
    fn azimuthal_reference_points() {
        let m = montage(&[[0.0, 0.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]);
        let out = azimuthal_equidistant(&m).unwrap();
        assert_eq!(out.coords2d[0], [0.0, 0.0]);
        assert!((out.coords2d[1][0] - FRAC_PI_2).abs() < 1e-15 && out.coords2d[1][1].abs() < 1e-15);
        assert!(out.coords2d[2][0].abs() < 1e-15 && (out.coords2d[2][1] - FRAC_PI_2).abs() < 1e-15);
    }

    #[test]
    fn antipodal_point_rejected() {
        let m = montage(&[[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]]);
        assert!(matches!(azimuthal_equidistant(&m), Err(CoordError::AntipodalPoint { .. })));
    }

    #[test]
    fn radius_equals_angle_from_center() {
        let m = crate::ingest::default_montage();
        let out = azimuthal_equidistant(&m).unwrap();
        for (p, q) in m.coords3d.iter().zip(&out.coords2d) {
            let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            let theta = (p[2] / r).acos();
            assert!(((q[0] * q[0] + q[1] * q[1]).sqrt() - theta).abs() < 1e-12);
        }
    }
}
