use std::collections::HashSet;

use super::{sq_dist, CoordError, CoordinateMap2D};
use crate::ingest::ElectrodeMontage;

fn knn<const D: usize>(points: &[[f64; D]], i: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> =
        (0..points.len()).filter(|&j| j != i).map(|j| (sq_dist(&points[i], &points[j]), j)).collect();
    // Ties resolved by electrode index.
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Mean fraction of each electrode's k nearest 3D neighbours that are also
/// among its k nearest neighbours on the map.
pub fn neighbor_preservation(
    map: &CoordinateMap2D,
    montage: &ElectrodeMontage,
    k: usize,
) -> Result<f64, CoordError> {
    let n = montage.len();
    if map.len() != n {
        return Err(CoordError::SizeMismatch { map: map.len(), montage: n });
    }
    if k < 1 || k + 1 >= n {
        return Err(CoordError::KOutOfRange { k, max: n.saturating_sub(2), n });
    }
    let total: f64 = (0..n)
        .map(|i| {
            let a: HashSet<usize> = knn(&montage.coords3d, i, k).into_iter().collect();
            knn(&map.coords2d, i, k).iter().filter(|j| a.contains(j)).count() as f64 / k as f64
        })
        .sum();
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::TransformMethod;
    use rand::seq::SliceRandom;

    fn planar(n: usize) -> ElectrodeMontage {
        let coords = (0..n)
            .map(|i| {
                let a = i as f64 * 2.399;
                let r = 0.6 + 0.4 * (i as f64 / n as f64);
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect();
        ElectrodeMontage::new((0..n).map(|i| format!("E{i}")).collect(), coords).unwrap()
    }

    #[test]
    fn rigid_rotation_preserves_all_neighbours() {
        let m = planar(20);
        let (s, c) = 0.83_f64.sin_cos();
        let map = CoordinateMap2D {
            labels: m.labels.clone(),
            coords2d: m.coords3d.iter().map(|&[x, y, _]| [c * x - s * y + 3.0, s * x + c * y - 1.0]).collect(),
            method: TransformMethod::Parallel,
        };
        for k in 1..18 {
            assert_eq!(neighbor_preservation(&map, &m, k).unwrap(), 1.0);
        }
    }

    #[test]
    fn k_range_checked() {
        let m = planar(10);
        let map = crate::coords::parallel_projection(&m);
        assert!(matches!(neighbor_preservation(&map, &m, 10), Err(CoordError::KOutOfRange { .. })));
        assert!(matches!(neighbor_preservation(&map, &m, 9), Err(CoordError::KOutOfRange { .. })));
        assert!(matches!(neighbor_preservation(&map, &m, 0), Err(CoordError::KOutOfRange { .. })));
        assert!(neighbor_preservation(&map, &m, 8).is_ok());
    }

    #[test]
    fn shuffled_map_scores_near_chance() {
        // Monte-Carlo over 1000 shuffles: expected overlap for k = 1 is 1/(n-1).
        let m = planar(40);
        let base = crate::coords::parallel_projection(&m);
        let mut rng = crate::rng::rng_from_seed(5);
        let mut acc = 0.0;
        for _ in 0..1000 {
            let mut coords = base.coords2d.clone();
            coords.shuffle(&mut rng);
            let map = CoordinateMap2D { coords2d: coords, ..base.clone() };
            acc += neighbor_preservation(&map, &m, 1).unwrap();
        }
        let mean = acc / 1000.0;
        let chance = 1.0 / 39.0;
        assert!((mean - chance).abs() < 0.25 * chance, "mean {mean} vs chance {chance}");
    }
}
