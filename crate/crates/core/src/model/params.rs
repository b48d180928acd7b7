use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::{Mixer, ModelConfig};
use crate::rng::rng_from_seed;

/// Dense row-major array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![0.0; shape.iter().product()] }
    }

    pub fn filled(shape: &[usize], v: f64) -> Self {
        Tensor { shape: shape.to_vec(), data: vec![v; shape.iter().product()] }
    }

    fn normal<R: Rng>(shape: &[usize], std: f64, rng: &mut R) -> Self {
        let dist = Normal::new(0.0, std).expect("finite std");
        let n = shape.iter().product();
        Tensor { shape: shape.to_vec(), data: (0..n).map(|_| dist.sample(rng)).collect() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvParams {
    /// `[out_channels, in_channels, 3, 3]`
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractorParams {
    pub convs: Vec<ConvParams>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub norm1_gain: Tensor,
    pub norm1_bias: Tensor,
    /// LayerScale of the token-mixer branch.
    pub scale1: Tensor,
    pub norm2_gain: Tensor,
    pub norm2_bias: Tensor,
    /// LayerScale of the MLP branch.
    pub scale2: Tensor,
    /// `[hidden, L]`
    pub fc1_weight: Tensor,
    pub fc1_bias: Tensor,
    /// `[L, hidden]`
    pub fc2_weight: Tensor,
    pub fc2_bias: Tensor,
}

/// All trainable tensors.
///
/// Canonical order (used by the optimizer and checkpoints): every extractor
/// in frame order, each conv layer as weight then bias; every block as
/// norm1 gain/bias, scale1, norm2 gain/bias, scale2, fc1 weight/bias, fc2
/// weight/bias; then the final norm gain/bias and the head weight/bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub extractors: Vec<ExtractorParams>,
    pub blocks: Vec<BlockParams>,
    pub norm_gain: Tensor,
    pub norm_bias: Tensor,
    /// `[num_classes, L]`
    pub head_weight: Tensor,
    pub head_bias: Tensor,
}

const LINEAR_INIT_STD: f64 = 0.02;

impl ModelParams {
    /// Shapes in canonical order for a config.
    pub fn shapes(cfg: &ModelConfig) -> Vec<Vec<usize>> {
        ModelParams::zeros(cfg).tensors().iter().map(|t| t.shape.clone()).collect()
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        let l = cfg.feature_len();
        let hid = cfg.hidden_len();
        let conv_shapes = conv_channels(cfg);
        ModelParams {
            extractors: (0..cfg.n_extractors())
                .map(|_| ExtractorParams {
                    convs: conv_shapes
                        .iter()
                        .map(|&(cin, cout)| ConvParams {
                            weight: Tensor::zeros(&[cout, cin, 3, 3]),
                            bias: Tensor::zeros(&[cout]),
                        })
                        .collect(),
                })
                .collect(),
            blocks: (0..cfg.num_blocks)
                .map(|_| BlockParams {
                    norm1_gain: Tensor::zeros(&[l]),
                    norm1_bias: Tensor::zeros(&[l]),
                    scale1: Tensor::zeros(&[l]),
                    norm2_gain: Tensor::zeros(&[l]),
                    norm2_bias: Tensor::zeros(&[l]),
                    scale2: Tensor::zeros(&[l]),
                    fc1_weight: Tensor::zeros(&[hid, l]),
                    fc1_bias: Tensor::zeros(&[hid]),
                    fc2_weight: Tensor::zeros(&[l, hid]),
                    fc2_bias: Tensor::zeros(&[l]),
                })
                .collect(),
            norm_gain: Tensor::zeros(&[l]),
            norm_bias: Tensor::zeros(&[l]),
            head_weight: Tensor::zeros(&[cfg.num_classes, l]),
            head_bias: Tensor::zeros(&[cfg.num_classes]),
        }
    }

    /// Seeded initialization: He-normal convolutions, N(0, 0.02²) linear
    /// weights, zero biases, unit norm gains, LayerScale at `layerscale_init`
    /// (zero for a disabled mixer).
    pub fn init(cfg: &ModelConfig) -> Self {
        let mut rng = rng_from_seed(cfg.seed);
        let mut p = ModelParams::zeros(cfg);
        for ex in &mut p.extractors {
            for conv in &mut ex.convs {
                let fan_in = conv.weight.shape[1] * 9;
                conv.weight = Tensor::normal(&conv.weight.shape, (2.0 / fan_in as f64).sqrt(), &mut rng);
            }
        }
        let l = cfg.feature_len();
        for b in &mut p.blocks {
            b.norm1_gain = Tensor::filled(&[l], 1.0);
            b.norm2_gain = Tensor::filled(&[l], 1.0);
            b.scale1 = Tensor::filled(&[l], if cfg.mixer == Mixer::None { 0.0 } else { cfg.layerscale_init });
            b.scale2 = Tensor::filled(&[l], cfg.layerscale_init);
            b.fc1_weight = Tensor::normal(&b.fc1_weight.shape, LINEAR_INIT_STD, &mut rng);
            b.fc2_weight = Tensor::normal(&b.fc2_weight.shape, LINEAR_INIT_STD, &mut rng);
        }
        p.norm_gain = Tensor::filled(&[l], 1.0);
        p.head_weight = Tensor::normal(&p.head_weight.shape, LINEAR_INIT_STD, &mut rng);
        p
    }

    pub fn tensors(&self) -> Vec<&Tensor> {
        let mut v = Vec::new();
        for ex in &self.extractors {
            for c in &ex.convs {
                v.push(&c.weight);
                v.push(&c.bias);
            }
        }
        for b in &self.blocks {
            v.extend([
                &b.norm1_gain,
                &b.norm1_bias,
                &b.scale1,
                &b.norm2_gain,
                &b.norm2_bias,
                &b.scale2,
                &b.fc1_weight,
                &b.fc1_bias,
                &b.fc2_weight,
                &b.fc2_bias,
            ]);
        }
        v.extend([&self.norm_gain, &self.norm_bias, &self.head_weight, &self.head_bias]);
        v
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor> {
        let mut v = Vec::new();
        for ex in &mut self.extractors {
            for c in &mut ex.convs {
                v.push(&mut c.weight);
                v.push(&mut c.bias);
            }
        }
        for b in &mut self.blocks {
            v.extend([
                &mut b.norm1_gain,
                &mut b.norm1_bias,
                &mut b.scale1,
                &mut b.norm2_gain,
                &mut b.norm2_bias,
                &mut b.scale2,
                &mut b.fc1_weight,
                &mut b.fc1_bias,
                &mut b.fc2_weight,
                &mut b.fc2_bias,
            ]);
        }
        v.extend([&mut self.norm_gain, &mut self.norm_bias, &mut self.head_weight, &mut self.head_bias]);
        v
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.data.iter_mut().for_each(|v| *v = 0.0);
        }
        z
    }

    pub fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// `self += other`
    pub fn add_assign(&mut self, other: &ModelParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= k);
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }
}

/// `(in_channels, out_channels)` of each extractor conv layer.
pub(super) fn conv_channels(cfg: &ModelConfig) -> Vec<(usize, usize)> {
    (0..cfg.stage).map(|i| (if i == 0 { 1 } else { cfg.c1 << (i - 1) }, cfg.c1 << i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_flag_controls_extractor_count() {
        let cfg = ModelConfig { n_frames: 5, ..ModelConfig::default() };
        assert_eq!(ModelParams::init(&cfg).extractors.len(), 1);
        let per_frame = ModelConfig { shared_extractor: false, ..cfg };
        let p = ModelParams::init(&per_frame);
        assert_eq!(p.extractors.len(), 5);
        assert_ne!(p.extractors[0], p.extractors[1]);
    }

    #[test]
    fn init_is_seeded() {
        let cfg = ModelConfig::default();
        assert_eq!(ModelParams::init(&cfg), ModelParams::init(&cfg));
        assert_ne!(ModelParams::init(&cfg), ModelParams::init(&ModelConfig { seed: 1, ..cfg }));
    }

    #[test]
    fn layerscale_init_and_disabled_mixer() {
        let cfg = ModelConfig { layerscale_init: 0.25, ..ModelConfig::default() };
        let p = ModelParams::init(&cfg);
        assert!(p.blocks.iter().all(|b| b.scale1.data.iter().all(|&v| v == 0.25)));
        let none = ModelParams::init(&ModelConfig { mixer: Mixer::None, ..cfg });
        assert!(none.blocks.iter().all(|b| b.scale1.data.iter().all(|&v| v == 0.0)));
        assert!(none.blocks.iter().all(|b| b.scale2.data.iter().all(|&v| v == 0.25)));
    }

    #[test]
    fn conv_channel_doubling() {
        let cfg = ModelConfig { stage: 4, c1: 80, ..ModelConfig::default() };
        assert_eq!(conv_channels(&cfg), vec![(1, 80), (80, 160), (160, 320), (320, 640)]);
    }
}
