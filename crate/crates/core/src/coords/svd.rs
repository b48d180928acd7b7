use nalgebra::DMatrix;

use super::{CoordError, CoordinateMap2D, TransformMethod};
use crate::ingest::ElectrodeMontage;

/// Standard deviation of the first embedding column after scaling.
const INIT_SCALE: f64 = 1e-4;

/// Project centered coordinates onto the right-singular vectors of the two
/// largest singular values (full SVD over every electrode).
///
/// Each singular vector's largest-magnitude entry is made positive, then both
/// columns are scaled so the first has standard deviation 1e-4.
pub fn svd_init(m: &ElectrodeMontage) -> Result<CoordinateMap2D, CoordError> {
    let n = m.len();
    if n < 3 {
        return Err(CoordError::TooFewElectrodes { needed: 3, have: n });
    }
    let mut mean = [0.0; 3];
    for p in &m.coords3d {
        for k in 0..3 {
            mean[k] += p[k];
        }
    }
    mean.iter_mut().for_each(|v| *v /= n as f64);
    let centered = DMatrix::from_fn(n, 3, |i, k| m.coords3d[i][k] - mean[k]);

    let svd = centered.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    if sv[0] <= 1e-12 || sv[1] <= 1e-10 * sv[0] {
        return Err(CoordError::DegenerateRankBelow2 { singular_values: sv });
    }

    let mut cols = [vec![0.0; n], vec![0.0; n]];
    for (c, &idx) in order.iter().take(2).enumerate() {
        let mut v: Vec<f64> = (0..3).map(|k| v_t[(idx, k)]).collect();
        let dominant = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        if dominant < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for i in 0..n {
            cols[c][i] = (0..3).map(|k| centered[(i, k)] * v[k]).sum();
        }
    }

    let std0 = {
        let mu = cols[0].iter().sum::<f64>() / n as f64;
        (cols[0].iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / n as f64).sqrt()
    };
    let scale = INIT_SCALE / std0;
    Ok(CoordinateMap2D {
        labels: m.labels.clone(),
        coords2d: (0..n).map(|i| [cols[0][i] * scale, cols[1][i] * scale]).collect(),
        method: TransformMethod::SvdInit,
    })
}
