use rand::Rng;

use super::config::{Mixer, ModelConfig};
use super::extractor::{make_extractor, ConvExtractor, ExtractorCache};
use super::layers::{
    gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, pool2d, pool2d_backward,
    positional_encoding, NormCache,
};
use super::params::{BlockParams, ModelParams};
use super::ModelError;
use crate::augment::SoftLabeledBatch;
use crate::exec::Execution;
use crate::rng::{child_seed, rng_from_seed};

/// Whether dropout is active. Training mode carries the seed from which each
/// sample's dropout masks are derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Eval,
    Train { dropout_seed: u64 },
}

/// Configuration, parameters, and the derived extractor geometry and
/// positional-encoding table.
#[derive(Debug, Clone, PartialEq)]
pub struct StPoolModel {
    pub config: ModelConfig,
    pub params: ModelParams,
    extractor: ConvExtractor,
    pe: Vec<f64>,
}

impl StPoolModel {
    /// Freshly initialized model.
    pub fn new(config: ModelConfig) -> Result<Self, ModelError> {
        let params = ModelParams::init(&config);
        Self::from_params(config, params)
    }

    pub fn from_params(config: ModelConfig, params: ModelParams) -> Result<Self, ModelError> {
        let extractor = make_extractor(&config)?;
        let expected = ModelParams::shapes(&config);
        let got: Vec<Vec<usize>> = params.tensors().iter().map(|t| t.shape.clone()).collect();
        if expected != got {
            return Err(ModelError::ShapeMismatch(format!(
                "parameter shapes do not match config ({} tensors expected, {} given)",
                expected.len(),
                got.len()
            )));
        }
        let pe = positional_encoding(config.n_frames, config.feature_len())?;
        Ok(StPoolModel { config, params, extractor, pe })
    }

    pub fn extractor(&self) -> &ConvExtractor {
        &self.extractor
    }

    fn extractor_index(&self, frame: usize) -> usize {
        if self.config.shared_extractor {
            0
        } else {
            frame
        }
    }

    fn check_input(&self, frames: &[f64]) -> Result<(), ModelError> {
        if frames.len() != self.config.input_len() {
            return Err(ModelError::ShapeMismatch(format!(
                "input has {} values, expected {}x{}x{} = {}",
                frames.len(),
                self.config.n_frames,
                self.config.h,
                self.config.w,
                self.config.input_len()
            )));
        }
        Ok(())
    }
}

struct BlockCache {
    norm1: NormCache,
    /// pool(LN1(x)) − LN1(x); empty when the mixer is disabled.
    mixed: Vec<f64>,
    norm2: NormCache,
    normed2: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    /// MLP output after dropout.
    branch: Vec<f64>,
    /// Inverted-dropout multipliers (0 or 1/(1−p)); `None` when inactive.
    mask: Option<Vec<f64>>,
}

fn block_forward<R: Rng>(
    cfg: &ModelConfig,
    p: &BlockParams,
    x: &[f64],
    dropout: Option<&mut R>,
) -> (Vec<f64>, BlockCache) {
    let (n, l) = (cfg.n_frames, cfg.feature_len());
    let (normed1, norm1) = layer_norm(x, l, &p.norm1_gain.data, &p.norm1_bias.data);
    let mut u = x.to_vec();
    let mixed = match cfg.mixer {
        Mixer::StPool => {
            let pooled = pool2d(&normed1, n, l, cfg.pool_kernel);
            let mixed: Vec<f64> = pooled.iter().zip(&normed1).map(|(p, a)| p - a).collect();
            for (idx, v) in u.iter_mut().enumerate() {
                *v += p.scale1.data[idx % l] * mixed[idx];
            }
            mixed
        }
        Mixer::None => Vec::new(),
    };

    let (normed2, norm2) = layer_norm(&u, l, &p.norm2_gain.data, &p.norm2_bias.data);
    let hidden_pre = linear(&normed2, l, &p.fc1_weight.data, &p.fc1_bias.data);
    let hidden: Vec<f64> = hidden_pre.iter().map(|&v| gelu(v)).collect();
    let mut branch = linear(&hidden, cfg.hidden_len(), &p.fc2_weight.data, &p.fc2_bias.data);
    let mask = match dropout {
        Some(rng) if cfg.drop_rate > 0.0 => {
            let keep = 1.0 / (1.0 - cfg.drop_rate);
            let m: Vec<f64> =
                (0..branch.len()).map(|_| if rng.random::<f64>() < cfg.drop_rate { 0.0 } else { keep }).collect();
            branch.iter_mut().zip(&m).for_each(|(b, k)| *b *= k);
            Some(m)
        }
        _ => None,
    };
    let y = u.iter().enumerate().map(|(idx, &v)| v + p.scale2.data[idx % l] * branch[idx]).collect();
    (y, BlockCache { norm1, mixed, norm2, normed2, hidden_pre, hidden, branch, mask })
}

fn block_backward(cfg: &ModelConfig, p: &BlockParams, c: &BlockCache, dy: &[f64], g: &mut BlockParams) -> Vec<f64> {
    let (n, l) = (cfg.n_frames, cfg.feature_len());
    let hid = cfg.hidden_len();

    // y = u + s2 ⊙ branch
    let mut dbranch = vec![0.0; dy.len()];
    for idx in 0..dy.len() {
        g.scale2.data[idx % l] += dy[idx] * c.branch[idx];
        dbranch[idx] = dy[idx] * p.scale2.data[idx % l];
    }
    if let Some(mask) = &c.mask {
        dbranch.iter_mut().zip(mask).for_each(|(d, m)| *d *= m);
    }
    let dhidden = linear_backward(&dbranch, &c.hidden, hid, &p.fc2_weight.data, &mut g.fc2_weight.data, &mut g.fc2_bias.data);
    let dhidden_pre: Vec<f64> = dhidden.iter().zip(&c.hidden_pre).map(|(d, &z)| d * gelu_grad(z)).collect();
    let dnormed2 =
        linear_backward(&dhidden_pre, &c.normed2, l, &p.fc1_weight.data, &mut g.fc1_weight.data, &mut g.fc1_bias.data);
    let du_norm = layer_norm_backward(&dnormed2, l, &p.norm2_gain.data, &c.norm2, &mut g.norm2_gain.data, &mut g.norm2_bias.data);
    let du: Vec<f64> = dy.iter().zip(&du_norm).map(|(a, b)| a + b).collect();

    // u = x + s1 ⊙ (pool(LN1 x) − LN1 x)
    let mut dx = du.clone();
    if cfg.mixer == Mixer::StPool {
        let mut dmixed = vec![0.0; du.len()];
        for idx in 0..du.len() {
            g.scale1.data[idx % l] += du[idx] * c.mixed[idx];
            dmixed[idx] = du[idx] * p.scale1.data[idx % l];
        }
        let dpool = pool2d_backward(&dmixed, n, l, cfg.pool_kernel);
        let dnormed1: Vec<f64> = dpool.iter().zip(&dmixed).map(|(a, b)| a - b).collect();
        let dx_norm =
            layer_norm_backward(&dnormed1, l, &p.norm1_gain.data, &c.norm1, &mut g.norm1_gain.data, &mut g.norm1_bias.data);
        dx.iter_mut().zip(&dx_norm).for_each(|(a, b)| *a += b);
    }
    dx
}

/// One ST-pooling block on an N × L plane (row-major). With `dropout_seed`
/// set, dropout is applied on the MLP branch.
pub fn stpool_block(
    cfg: &ModelConfig,
    params: &BlockParams,
    x: &[f64],
    dropout_seed: Option<u64>,
) -> Result<Vec<f64>, ModelError> {
    if x.len() != cfg.n_frames * cfg.feature_len() {
        return Err(ModelError::ShapeMismatch(format!(
            "block input has {} values, expected {}x{}",
            x.len(),
            cfg.n_frames,
            cfg.feature_len()
        )));
    }
    let mut rng = dropout_seed.map(rng_from_seed);
    Ok(block_forward(cfg, params, x, rng.as_mut()).0)
}

struct SampleCache {
    extractor: Vec<ExtractorCache>,
    blocks: Vec<BlockCache>,
    final_norm: NormCache,
    pooled: Vec<f64>,
    probs: Vec<f64>,
}

/// Extractor output for every frame, stacked to N × L (before positional encoding).
pub fn forward_features(model: &StPoolModel, frames: &[f64]) -> Result<Vec<f64>, ModelError> {
    model.check_input(frames)?;
    let fl = model.config.frame_len();
    Ok((0..model.config.n_frames)
        .flat_map(|t| {
            let p = &model.params.extractors[model.extractor_index(t)];
            model.extractor.forward(p, &frames[t * fl..(t + 1) * fl]).0
        })
        .collect())
}

fn forward_sample(model: &StPoolModel, frames: &[f64], mode: Mode, sample_index: u64) -> (Vec<f64>, SampleCache) {
    let cfg = &model.config;
    let (n, l) = (cfg.n_frames, cfg.feature_len());
    let fl = cfg.frame_len();

    let mut ex_caches = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n * l);
    for t in 0..n {
        let p = &model.params.extractors[model.extractor_index(t)];
        let (f, c) = model.extractor.forward(p, &frames[t * fl..(t + 1) * fl]);
        x.extend(f);
        ex_caches.push(c);
    }
    x.iter_mut().zip(&model.pe).for_each(|(v, p)| *v += p);

    let mut rng = match mode {
        Mode::Train { dropout_seed } => Some(rng_from_seed(child_seed(dropout_seed, sample_index))),
        Mode::Eval => None,
    };
    let mut block_caches = Vec::with_capacity(cfg.num_blocks);
    for bp in &model.params.blocks {
        let (y, c) = block_forward(cfg, bp, &x, rng.as_mut());
        x = y;
        block_caches.push(c);
    }

    let (z, final_norm) = layer_norm(&x, l, &model.params.norm_gain.data, &model.params.norm_bias.data);
    let mut pooled = vec![0.0; l];
    for row in z.chunks_exact(l) {
        pooled.iter_mut().zip(row).for_each(|(a, b)| *a += b);
    }
    pooled.iter_mut().for_each(|v| *v /= n as f64);
    let logits = linear(&pooled, l, &model.params.head_weight.data, &model.params.head_bias.data);
    let probs = softmax(&logits);
    (probs.clone(), SampleCache { extractor: ex_caches, blocks: block_caches, final_norm, pooled, probs })
}

fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

fn backward_sample(model: &StPoolModel, frames: &[f64], c: &SampleCache, dlogits: &[f64]) -> ModelParams {
    let cfg = &model.config;
    let (n, l) = (cfg.n_frames, cfg.feature_len());
    let mut g = model.params.zeros_like();

    let dpooled = linear_backward(dlogits, &c.pooled, l, &model.params.head_weight.data, &mut g.head_weight.data, &mut g.head_bias.data);
    let dz: Vec<f64> = (0..n * l).map(|idx| dpooled[idx % l] / n as f64).collect();
    let mut dx =
        layer_norm_backward(&dz, l, &model.params.norm_gain.data, &c.final_norm, &mut g.norm_gain.data, &mut g.norm_bias.data);

    for (b, cache) in c.blocks.iter().enumerate().rev() {
        dx = block_backward(cfg, &model.params.blocks[b], cache, &dx, &mut g.blocks[b]);
    }
    if cfg.mixer == Mixer::None {
        g.blocks.iter_mut().for_each(|b| b.scale1.data.iter_mut().for_each(|v| *v = 0.0));
    }

    let fl = cfg.frame_len();
    for t in 0..n {
        let e = model.extractor_index(t);
        let _ = &frames[t * fl..(t + 1) * fl];
        model.extractor.backward(&model.params.extractors[e], &c.extractor[t], &dx[t * l..(t + 1) * l], &mut g.extractors[e]);
    }
    g
}

/// Class probabilities for one N·H·W frame buffer.
pub fn forward(model: &StPoolModel, frames: &[f64], mode: Mode) -> Result<Vec<f64>, ModelError> {
    model.check_input(frames)?;
    Ok(forward_sample(model, frames, mode, 0).0)
}

/// Argmax class, ties to the lowest index.
pub fn predict(model: &StPoolModel, frames: &[f64]) -> Result<usize, ModelError> {
    Ok(argmax(&forward(model, frames, Mode::Eval)?))
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Batch loss, mean gradient and argmax hits against the dominant label weight.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    /// Mean soft-label cross-entropy.
    pub loss: f64,
    pub grads: ModelParams,
    pub correct: usize,
}

/// Mean cross-entropy against soft labels and its exact gradient. Samples
/// may be evaluated in parallel; the reduction is always in sample order.
pub fn loss_and_grad(
    model: &StPoolModel,
    batch: &SoftLabeledBatch,
    mode: Mode,
    exec: Execution,
) -> Result<BatchGrad, ModelError> {
    if batch.is_empty() {
        return Err(ModelError::EmptyBatch);
    }
    for (f, y) in batch.frames.iter().zip(&batch.labels) {
        model.check_input(f)?;
        if y.len() != model.config.num_classes {
            return Err(ModelError::ShapeMismatch(format!(
                "label has {} classes, model has {}",
                y.len(),
                model.config.num_classes
            )));
        }
    }
    let per_sample = exec.map_range(batch.len(), |i| {
        let (frames, target) = (&batch.frames[i], &batch.labels[i]);
        let (_, cache) = forward_sample(model, frames, mode, i as u64);
        let loss: f64 = target
            .iter()
            .zip(&cache.probs)
            .filter(|(y, _)| **y > 0.0)
            .map(|(y, p)| -y * p.max(f64::MIN_POSITIVE).ln())
            .sum();
        let dlogits: Vec<f64> = cache.probs.iter().zip(target).map(|(p, y)| p - y).collect();
        let grads = backward_sample(model, frames, &cache, &dlogits);
        let hit = argmax(&cache.probs) == argmax(target);
        (loss, grads, hit)
    });

    let mut iter = per_sample.into_iter();
    let (mut loss, mut grads, hit) = iter.next().expect("nonempty batch");
    let mut correct = hit as usize;
    for (l, g, h) in iter {
        loss += l;
        grads.add_assign(&g);
        correct += h as usize;
    }
    let b = batch.len() as f64;
    grads.scale(1.0 / b);
    Ok(BatchGrad { loss: loss / b, grads, correct })
}
