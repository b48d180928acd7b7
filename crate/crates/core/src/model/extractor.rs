use super::config::ModelConfig;
use super::layers::{dot, gelu, gelu_grad};
use super::params::{conv_channels, ExtractorParams};
use super::ModelError;

/// Geometry of one 3×3, stride-2, pad-1 convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvShape {
    pub cin: usize,
    pub cout: usize,
    pub h_in: usize,
    pub w_in: usize,
    pub h_out: usize,
    pub w_out: usize,
}

/// Reference per-frame extractor: `stage` × {3×3 stride-2 conv, bias, GELU}
/// with channels c1, 2·c1, …, then global average pooling per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvExtractor {
    pub layers: Vec<ConvShape>,
}

/// Saved activations of one frame.
#[derive(Debug, Clone)]
pub struct ExtractorCache {
    /// Unfolded input windows of each layer.
    patches: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
}

pub fn make_extractor(cfg: &ModelConfig) -> Result<ConvExtractor, ModelError> {
    cfg.validate()?;
    let (mut h, mut w) = (cfg.h, cfg.w);
    let layers = conv_channels(cfg)
        .into_iter()
        .map(|(cin, cout)| {
            let s = ConvShape { cin, cout, h_in: h, w_in: w, h_out: h.div_ceil(2), w_out: w.div_ceil(2) };
            (h, w) = (s.h_out, s.w_out);
            s
        })
        .collect();
    Ok(ConvExtractor { layers })
}

/// Unfold every 3×3 stride-2 window into a row: `patches[p·cin·9 + c·9 + k]`
/// for output pixel p, with zeros where the window leaves the input.
fn im2col(s: &ConvShape, x: &[f64]) -> Vec<f64> {
    let kk = s.cin * 9;
    let mut patches = vec![0.0; s.h_out * s.w_out * kk];
    for i in 0..s.h_out {
        for j in 0..s.w_out {
            let row = &mut patches[(i * s.w_out + j) * kk..(i * s.w_out + j + 1) * kk];
            for ki in 0..3 {
                let Some(y) = (2 * i + ki).checked_sub(1).filter(|&y| y < s.h_in) else { continue };
                for kj in 0..3 {
                    let Some(xx) = (2 * j + kj).checked_sub(1).filter(|&xx| xx < s.w_in) else { continue };
                    for c in 0..s.cin {
                        row[c * 9 + ki * 3 + kj] = x[(c * s.h_in + y) * s.w_in + xx];
                    }
                }
            }
        }
    }
    patches
}

/// Adjoint of [`im2col`].
fn col2im(s: &ConvShape, dpatches: &[f64]) -> Vec<f64> {
    let kk = s.cin * 9;
    let mut dx = vec![0.0; s.cin * s.h_in * s.w_in];
    for i in 0..s.h_out {
        for j in 0..s.w_out {
            let row = &dpatches[(i * s.w_out + j) * kk..(i * s.w_out + j + 1) * kk];
            for ki in 0..3 {
                let Some(y) = (2 * i + ki).checked_sub(1).filter(|&y| y < s.h_in) else { continue };
                for kj in 0..3 {
                    let Some(xx) = (2 * j + kj).checked_sub(1).filter(|&xx| xx < s.w_in) else { continue };
                    for c in 0..s.cin {
                        dx[(c * s.h_in + y) * s.w_in + xx] += row[c * 9 + ki * 3 + kj];
                    }
                }
            }
        }
    }
    dx
}

/// Channel-major `[cout, h_out, w_out]` output from unfolded patches.
fn conv_forward(s: &ConvShape, patches: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
    let kk = s.cin * 9;
    let hw = s.h_out * s.w_out;
    let mut out = vec![0.0; s.cout * hw];
    for o in 0..s.cout {
        let w = &weight[o * kk..(o + 1) * kk];
        for p in 0..hw {
            out[o * hw + p] = bias[o] + dot(w, &patches[p * kk..(p + 1) * kk]);
        }
    }
    out
}

/// Accumulates weight/bias gradients; returns the input gradient when asked.
fn conv_backward(
    s: &ConvShape,
    patches: &[f64],
    weight: &[f64],
    dz: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
    need_input_grad: bool,
) -> Option<Vec<f64>> {
    let kk = s.cin * 9;
    let hw = s.h_out * s.w_out;
    let mut dpatches = need_input_grad.then(|| vec![0.0; hw * kk]);
    for o in 0..s.cout {
        let w = &weight[o * kk..(o + 1) * kk];
        let dw = &mut dweight[o * kk..(o + 1) * kk];
        for p in 0..hw {
            let g = dz[o * hw + p];
            dbias[o] += g;
            let patch = &patches[p * kk..(p + 1) * kk];
            dw.iter_mut().zip(patch).for_each(|(d, x)| *d += g * x);
            if let Some(dp) = dpatches.as_mut() {
                dp[p * kk..(p + 1) * kk].iter_mut().zip(w).for_each(|(d, wv)| *d += g * wv);
            }
        }
    }
    dpatches.map(|dp| col2im(s, &dp))
}

impl ConvExtractor {
    /// Length of the pooled feature vector: 2^(stage−1)·c1.
    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, |l| l.cout)
    }

    pub fn forward(&self, p: &ExtractorParams, frame: &[f64]) -> (Vec<f64>, ExtractorCache) {
        let mut patches = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = frame.to_vec();
        for (s, conv) in self.layers.iter().zip(&p.convs) {
            let cols = im2col(s, &x);
            let z = conv_forward(s, &cols, &conv.weight.data, &conv.bias.data);
            x = z.iter().map(|&v| gelu(v)).collect();
            patches.push(cols);
            pre.push(z);
        }
        let last = self.layers.last().expect("at least one layer");
        let area = last.h_out * last.w_out;
        let features = x.chunks_exact(area).map(|c| c.iter().sum::<f64>() / area as f64).collect();
        (features, ExtractorCache { patches, pre_activations: pre })
    }

    pub fn backward(&self, p: &ExtractorParams, cache: &ExtractorCache, dfeatures: &[f64], grads: &mut ExtractorParams) {
        let last = self.layers.last().expect("at least one layer");
        let area = last.h_out * last.w_out;
        let mut da: Vec<f64> = dfeatures.iter().flat_map(|&g| std::iter::repeat_n(g / area as f64, area)).collect();
        for (l, s) in self.layers.iter().enumerate().rev() {
            let dz: Vec<f64> = da.iter().zip(&cache.pre_activations[l]).map(|(g, &z)| g * gelu_grad(z)).collect();
            let gconv = &mut grads.convs[l];
            let next = conv_backward(
                s,
                &cache.patches[l],
                &p.convs[l].weight.data,
                &dz,
                &mut gconv.weight.data,
                &mut gconv.bias.data,
                l > 0,
            );
            match next {
                Some(d) => da = d,
                None => break,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;

    #[test]
    fn output_length_follows_stage_and_c1() {
        for (stage, c1, l) in [(1, 8, 8), (2, 8, 16), (3, 16, 64), (4, 80, 640), (1, 16, 16)] {
            let cfg = ModelConfig { stage, c1, h: 16, w: 16, n_frames: 2, ..ModelConfig::default() };
            let ex = make_extractor(&cfg).unwrap();
            assert_eq!(ex.output_len(), l);
            let p = ModelParams::init(&cfg);
            let (f, _) = ex.forward(&p.extractors[0], &vec![0.5; 256]);
            assert_eq!(f.len(), l);
        }
    }

    #[test]
    fn spatial_size_halves_with_ceiling() {
        let cfg = ModelConfig { stage: 3, c1: 4, h: 15, w: 32, ..ModelConfig::default() };
        let ex = make_extractor(&cfg).unwrap();
        let dims: Vec<(usize, usize)> = ex.layers.iter().map(|l| (l.h_out, l.w_out)).collect();
        assert_eq!(dims, vec![(8, 16), (4, 8), (2, 4)]);
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = ModelConfig { pool_kernel: 4, ..ModelConfig::default() };
        assert!(matches!(make_extractor(&cfg), Err(ModelError::ConfigInvalid(_))));
    }

    #[test]
    fn conv_matches_direct_padded_sum() {
        let s = ConvShape { cin: 2, cout: 1, h_in: 3, w_in: 4, h_out: 2, w_out: 2 };
        let x: Vec<f64> = (0..24).map(|v| v as f64).collect();
        let w: Vec<f64> = (0..18).map(|v| (v as f64 - 9.0) * 0.1).collect();
        let out = conv_forward(&s, &im2col(&s, &x), &w, &[0.5]);
        // Zero-pad the input and evaluate every tap explicitly.
        let padded = |c: usize, y: isize, x_: isize| -> f64 {
            if y < 0 || x_ < 0 || y >= 3 || x_ >= 4 { 0.0 } else { x[c * 12 + y as usize * 4 + x_ as usize] }
        };
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = 0.5;
                for c in 0..2 {
                    for ki in 0..3 {
                        for kj in 0..3 {
                            acc += w[c * 9 + ki * 3 + kj] * padded(c, 2 * i as isize + ki as isize - 1, 2 * j as isize + kj as isize - 1);
                        }
                    }
                }
                assert!((out[i * 2 + j] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn col2im_is_adjoint_of_im2col() {
        let s = ConvShape { cin: 3, cout: 1, h_in: 5, w_in: 6, h_out: 3, w_out: 3 };
        let x: Vec<f64> = (0..90).map(|v| (v as f64 * 0.37).sin()).collect();
        let y: Vec<f64> = (0..9 * 27).map(|v| (v as f64 * 0.11).cos()).collect();
        let lhs: f64 = im2col(&s, &x).iter().zip(&y).map(|(a, b)| a * b).sum();
        let rhs: f64 = col2im(&s, &y).iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }
}
