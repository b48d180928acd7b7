//! Exact t-SNE for small point sets (tens of electrodes).
//!
//! Gaussian input affinities with per-point bandwidths found by bisection on
//! the entropy, Student-t output affinities, and momentum gradient descent on
//! KL(P‖Q) starting from [`svd_init`](super::svd_init).

use super::{sq_dist, svd_init, CoordError, CoordinateMap2D, TransformMethod};
use crate::exec::Execution;
use crate::ingest::ElectrodeMontage;

const MAX_BISECTIONS: usize = 200;
/// Entropy tolerance of the bandwidth search, in bits.
const ENTROPY_TOL: f64 = 1e-10;
const Q_DENOM_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TsneParams {
    pub perplexity: f64,
    pub n_iter: usize,
    pub early_exaggeration_factor: f64,
    pub early_exaggeration_iters: usize,
    pub learning_rate: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    pub momentum_switch_iter: usize,
    /// Recorded for reproducibility. The SVD start makes the optimization
    /// itself deterministic, so no stream is drawn from it.
    pub seed: u64,
}

impl Default for TsneParams {
    fn default() -> Self {
        TsneParams {
            perplexity: 10.0,
            n_iter: 1000,
            early_exaggeration_factor: 12.0,
            early_exaggeration_iters: 250,
            learning_rate: 200.0,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch_iter: 250,
            seed: 0,
        }
    }
}

impl TsneParams {
    pub fn validate(&self, n: usize) -> Result<(), CoordError> {
        let upper = (n as f64 - 1.0) / 3.0;
        if !(self.perplexity > 1.0 && self.perplexity < upper) {
            return Err(CoordError::PerplexityOutOfRange { perplexity: self.perplexity, upper, n });
        }
        let bad = |what: &str| Err(CoordError::InvalidParams(what.to_string()));
        if self.n_iter < self.early_exaggeration_iters {
            return bad("n_iter must be at least early_exaggeration_iters");
        }
        if !(self.early_exaggeration_factor > 0.0) {
            return bad("early_exaggeration_factor must be positive");
        }
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.momentum_initial >= 0.0 && self.momentum_final >= 0.0) {
            return bad("momentum coefficients must be non-negative");
        }
        Ok(())
    }
}

/// Row-major n×n matrix of squared Euclidean distances.
pub fn pairwise_sq_distances<const D: usize>(points: &[[f64; D]], exec: Execution) -> Vec<f64> {
    let rows = exec.map_range(points.len(), |i| points.iter().map(|q| sq_dist(&points[i], q)).collect::<Vec<_>>());
    rows.concat()
}

/// Result of the bandwidth search for one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bandwidth {
    /// Precision β = 1/(2σ²) of the Gaussian kernel.
    pub beta: f64,
    /// Shannon entropy of the conditional distribution, in bits.
    pub entropy_bits: f64,
}

/// Conditional distribution p_{·|i} with its entropy at precision `beta`.
fn conditional_at(dist_row: &[f64], i: usize, d_min: f64, beta: f64, out: &mut [f64]) -> f64 {
    let mut sum = 0.0;
    for (j, (&d, o)) in dist_row.iter().zip(out.iter_mut()).enumerate() {
        *o = if j == i { 0.0 } else { (-beta * (d - d_min)).exp() };
        sum += *o;
    }
    let mut weighted = 0.0;
    for (j, o) in out.iter_mut().enumerate() {
        *o /= sum;
        if j != i {
            weighted += (dist_row[j] - d_min) * *o;
        }
    }
    (sum.ln() + beta * weighted) / std::f64::consts::LN_2
}

/// Find the kernel precision for point `i` whose conditional distribution has
/// entropy log2(perplexity); writes p_{·|i} into `out`.
pub fn search_bandwidth(
    dist_row: &[f64],
    i: usize,
    perplexity: f64,
    out: &mut [f64],
) -> Result<Bandwidth, CoordError> {
    let target = perplexity.log2();
    let d_min = dist_row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, &d)| d)
        .fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut beta = 1.0;
    for _ in 0..MAX_BISECTIONS {
        let h = conditional_at(dist_row, i, d_min, beta, out);
        let diff = h - target;
        if diff.abs() <= ENTROPY_TOL {
            return Ok(Bandwidth { beta, entropy_bits: h });
        }
        if diff > 0.0 {
            // Too flat: sharpen.
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (beta + lo);
        }
    }
    Err(CoordError::NonConvergedBandwidth { point: i })
}

/// Row-major conditional affinities p_{j|i} (rows sum to 1, zero diagonal)
/// and the bandwidth of each row.
pub fn conditional_affinities(
    sq_dists: &[f64],
    n: usize,
    perplexity: f64,
) -> Result<(Vec<f64>, Vec<Bandwidth>), CoordError> {
    let mut cond = vec![0.0; n * n];
    let mut bands = Vec::with_capacity(n);
    for (i, row) in cond.chunks_exact_mut(n).enumerate() {
        bands.push(search_bandwidth(&sq_dists[i * n..(i + 1) * n], i, perplexity, row)?);
    }
    Ok((cond, bands))
}

/// P = (p_{j|i} + p_{i|j}) / 2n.
pub fn symmetrize(cond: &[f64], n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            p[i * n + j] = (cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64);
        }
    }
    p
}

/// Unnormalized Student-t kernel matrix and its off-diagonal sum (floored).
fn student_t(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let v = 1.0 / (1.0 + sq_dist(&y[i], &y[j]));
                num[i * n + j] = v;
                z += v;
            }
        }
    }
    (num, z.max(Q_DENOM_FLOOR))
}

/// KL(P‖Q) for embedding `y`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (num, z) = student_t(y);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                let q = (num[i * n + j] / z).max(f64::MIN_POSITIVE);
                kl += pij * (pij / q).ln();
            }
        }
    }
    kl
}

/// ∂KL/∂y_i = 4 Σ_j (p_ij − q_ij)(1 + ‖y_i − y_j‖²)⁻¹ (y_i − y_j).
pub fn kl_gradient(p: &[f64], y: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, z) = student_t(y);
    let mut grad = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let coeff = 4.0 * (p[i * n + j] - w / z) * w;
            grad[i][0] += coeff * (y[i][0] - y[j][0]);
            grad[i][1] += coeff * (y[i][1] - y[j][1]);
        }
    }
    grad
}

/// Internal state exposed for diagnostics and tests.
#[derive(Debug, Clone)]
pub struct TsneTrace {
    pub conditional: Vec<f64>,
    pub bandwidths: Vec<Bandwidth>,
    /// Symmetrized joint affinities, row-major n×n.
    pub joint: Vec<f64>,
    /// `kl[t]` is KL(P‖Q) (unexaggerated) after iteration `t + 1`.
    pub kl: Vec<f64>,
}

pub fn tsne(m: &ElectrodeMontage, params: &TsneParams) -> Result<CoordinateMap2D, CoordError> {
    tsne_with_trace(m, params).map(|(map, _)| map)
}

pub fn tsne_with_trace(
    m: &ElectrodeMontage,
    params: &TsneParams,
) -> Result<(CoordinateMap2D, TsneTrace), CoordError> {
    let n = m.len();
    params.validate(n)?;
    let d = pairwise_sq_distances(&m.coords3d, Execution::default());
    let (conditional, bandwidths) = conditional_affinities(&d, n, params.perplexity)?;
    let joint = symmetrize(&conditional, n);

    let mut y = svd_init(m)?.coords2d;
    let mut velocity = vec![[0.0; 2]; n];
    let mut kl = Vec::with_capacity(params.n_iter);
    let exaggerated: Vec<f64> = joint.iter().map(|v| v * params.early_exaggeration_factor).collect();

    for it in 0..params.n_iter {
        let p = if it < params.early_exaggeration_iters { &exaggerated } else { &joint };
        let momentum =
            if it < params.momentum_switch_iter { params.momentum_initial } else { params.momentum_final };
        let grad = kl_gradient(p, &y);
        for ((yi, vi), gi) in y.iter_mut().zip(velocity.iter_mut()).zip(&grad) {
            for k in 0..2 {
                vi[k] = momentum * vi[k] - params.learning_rate * gi[k];
                yi[k] += vi[k];
            }
        }
        kl.push(kl_divergence(&joint, &y));
    }

    let map = CoordinateMap2D { labels: m.labels.clone(), coords2d: y, method: TransformMethod::Tsne };
    Ok((map, TsneTrace { conditional, bandwidths, joint, kl }))
}
