//! Row-major building blocks shared by the network's forward and backward
//! passes.

use super::ModelError;

/// LayerNorm epsilon. Small enough that normalized rows have unit variance to
/// ~1e-12 for the feature scales seen here.
pub const LN_EPS: f64 = 1e-12;

const SQRT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const GELU_CUBIC: f64 = 0.044_715;

/// tanh through one `exp`; libm's tanh dominated extractor time. Absolute
/// error stays at the rounding level, which is all GELU needs.
fn fast_tanh(u: f64) -> f64 {
    if u.abs() > 20.0 {
        return u.signum();
    }
    1.0 - 2.0 / ((2.0 * u).exp() + 1.0)
}

/// tanh-approximation GELU.
pub fn gelu(x: f64) -> f64 {
    let t = fast_tanh(SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x));
    0.5 * x * (1.0 + t)
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = fast_tanh(SQRT_2_OVER_PI * (x + GELU_CUBIC * x * x * x));
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * SQRT_2_OVER_PI * (1.0 + 3.0 * GELU_CUBIC * x * x)
}

/// Saved state of a row-wise LayerNorm.
#[derive(Debug, Clone)]
pub struct NormCache {
    pub normalized: Vec<f64>,
    pub rstd: Vec<f64>,
}

/// Normalize each length-`l` row of `x`, then apply gain and bias.
pub fn layer_norm(x: &[f64], l: usize, gain: &[f64], bias: &[f64]) -> (Vec<f64>, NormCache) {
    let rows = x.len() / l;
    let mut y = vec![0.0; x.len()];
    let mut normalized = vec![0.0; x.len()];
    let mut rstd = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x[r * l..(r + 1) * l];
        let mean = row.iter().sum::<f64>() / l as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / l as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd.push(rs);
        for j in 0..l {
            let xh = (row[j] - mean) * rs;
            normalized[r * l + j] = xh;
            y[r * l + j] = gain[j] * xh + bias[j];
        }
    }
    (y, NormCache { normalized, rstd })
}

/// Backward of [`layer_norm`]; accumulates gain/bias gradients and returns dx.
pub fn layer_norm_backward(
    dy: &[f64],
    l: usize,
    gain: &[f64],
    cache: &NormCache,
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let rows = dy.len() / l;
    let mut dx = vec![0.0; dy.len()];
    let mut dxh = vec![0.0; l];
    for r in 0..rows {
        let xh = &cache.normalized[r * l..(r + 1) * l];
        let g = &dy[r * l..(r + 1) * l];
        let (mut mean_d, mut mean_dx) = (0.0, 0.0);
        for j in 0..l {
            dgain[j] += g[j] * xh[j];
            dbias[j] += g[j];
            dxh[j] = g[j] * gain[j];
            mean_d += dxh[j];
            mean_dx += dxh[j] * xh[j];
        }
        mean_d /= l as f64;
        mean_dx /= l as f64;
        for j in 0..l {
            dx[r * l + j] = cache.rstd[r] * (dxh[j] - mean_d - xh[j] * mean_dx);
        }
    }
    dx
}

fn window(i: usize, n: usize, radius: usize) -> std::ops::Range<usize> {
    i.saturating_sub(radius)..(i + radius + 1).min(n)
}

/// Mean over a `k × k` window (stride 1, same size) of an `n × l` plane.
/// Windows are clipped at the borders and divided by the in-bounds count.
///
/// Each window is summed directly, row by row, so `k = 1` is an exact
/// identity. At the default k = 3 this costs 9 adds per output.
pub fn pool2d(x: &[f64], n: usize, l: usize, k: usize) -> Vec<f64> {
    assert!(k % 2 == 1, "pool kernel must be odd");
    let r = k / 2;
    let mut out = vec![0.0; n * l];
    for i in 0..n {
        let rows = window(i, n, r);
        for j in 0..l {
            let cols = window(j, l, r);
            let mut sum = 0.0;
            for a in rows.clone() {
                for b in cols.clone() {
                    sum += x[a * l + b];
                }
            }
            out[i * l + j] = sum / (rows.len() * cols.len()) as f64;
        }
    }
    out
}

/// Adjoint of [`pool2d`]: each output scatters its count-scaled gradient
/// back over its window.
pub fn pool2d_backward(dy: &[f64], n: usize, l: usize, k: usize) -> Vec<f64> {
    let r = k / 2;
    let mut dx = vec![0.0; n * l];
    for i in 0..n {
        let rows = window(i, n, r);
        for j in 0..l {
            let cols = window(j, l, r);
            let g = dy[i * l + j] / (rows.len() * cols.len()) as f64;
            for a in rows.clone() {
                for b in cols.clone() {
                    dx[a * l + b] += g;
                }
            }
        }
    }
    dx
}

/// Sinusoidal encoding: PE(n, 2i) = sin(n / 10000^(2i/L)),
/// PE(n, 2i+1) = cos(n / 10000^(2i/L)), row-major `n_frames × l_dim`.
pub fn positional_encoding(n_frames: usize, l_dim: usize) -> Result<Vec<f64>, ModelError> {
    if !l_dim.is_multiple_of(2) {
        return Err(ModelError::OddDimension(l_dim));
    }
    let mut pe = vec![0.0; n_frames * l_dim];
    for n in 0..n_frames {
        for i in 0..l_dim / 2 {
            let angle = n as f64 / 10000f64.powf(2.0 * i as f64 / l_dim as f64);
            pe[n * l_dim + 2 * i] = angle.sin();
            pe[n * l_dim + 2 * i + 1] = angle.cos();
        }
    }
    Ok(pe)
}

/// Dot product with four independent partial sums, so the adds pipeline
/// instead of forming one serial dependency chain.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    let mut acc = [0.0; 4];
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `y[r, o] = b[o] + Σ_i x[r, i] · w[o, i]` for `rows × d_in` input.
pub fn linear(x: &[f64], d_in: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let d_out = b.len();
    let rows = x.len() / d_in;
    let mut y = vec![0.0; rows * d_out];
    for r in 0..rows {
        let xr = &x[r * d_in..(r + 1) * d_in];
        for o in 0..d_out {
            let wo = &w[o * d_in..(o + 1) * d_in];
            y[r * d_out + o] = b[o] + dot(xr, wo);
        }
    }
    y
}

/// Backward of [`linear`]; accumulates dw, db and returns dx.
pub fn linear_backward(dy: &[f64], x: &[f64], d_in: usize, w: &[f64], dw: &mut [f64], db: &mut [f64]) -> Vec<f64> {
    let d_out = db.len();
    let rows = x.len() / d_in;
    let mut dx = vec![0.0; x.len()];
    for r in 0..rows {
        let xr = &x[r * d_in..(r + 1) * d_in];
        let dxr = &mut dx[r * d_in..(r + 1) * d_in];
        for o in 0..d_out {
            let g = dy[r * d_out + o];
            if g == 0.0 {
                continue;
            }
            db[o] += g;
            let wo = &w[o * d_in..(o + 1) * d_in];
            let dwo = &mut dw[o * d_in..(o + 1) * d_in];
            for i in 0..d_in {
                dwo[i] += g * xr[i];
                dxr[i] += g * wo[i];
            }
        }
    }
    dx
}
