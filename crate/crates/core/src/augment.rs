//! Training-time augmentation: Gaussian noise on raw signals, and MixUp /
//! CutMix on rendered map sequences with soft labels.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use thiserror::Error;

use crate::ingest::Epoch;
use crate::rng::rng_from_seed;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AugmentError {
    #[error("sample shapes differ: {a:?} vs {b:?}")]
    ShapeMismatch { a: (usize, usize, usize), b: (usize, usize, usize) },
    #[error("label lengths differ: {a} vs {b}")]
    LabelMismatch { a: usize, b: usize },
    #[error("mixing weight {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("rectangle {rect:?} exceeds {h}x{w} grid")]
    RectOutOfBounds { rect: Rect, h: usize, w: usize },
}

/// A rendered map sequence with a (possibly soft) label.
#[derive(Debug, Clone, PartialEq)]
pub struct MixSample {
    /// N·H·W pixel values, frame-major.
    pub frames: Vec<f64>,
    /// (N, H, W)
    pub dims: (usize, usize, usize),
    /// Class weights summing to one.
    pub label: Vec<f64>,
}

impl MixSample {
    pub fn hard(frames: Vec<f64>, dims: (usize, usize, usize), class: usize, num_classes: usize) -> Self {
        assert_eq!(frames.len(), dims.0 * dims.1 * dims.2, "frame buffer does not match dims");
        MixSample { frames, dims, label: one_hot(class, num_classes) }
    }
}

/// Batch of frame tensors with per-sample class weight rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SoftLabeledBatch {
    pub frames: Vec<Vec<f64>>,
    pub labels: Vec<Vec<f64>>,
}

impl SoftLabeledBatch {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn push(&mut self, s: MixSample) {
        self.frames.push(s.frames);
        self.labels.push(s.label);
    }
}

pub fn one_hot(class: usize, num_classes: usize) -> Vec<f64> {
    let mut v = vec![0.0; num_classes];
    v[class] = 1.0;
    v
}

/// Add unit-normal noise times `scale` to every raw sample.
pub fn gaussian_noise(e: &Epoch, scale: f64, seed: u64) -> Epoch {
    assert!(scale >= 0.0, "noise scale must be non-negative");
    if scale == 0.0 {
        return e.clone();
    }
    let mut rng = rng_from_seed(seed);
    let signals = e
        .signals
        .iter()
        .map(|ch| {
            ch.iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    v + scale * z
                })
                .collect()
        })
        .collect();
    Epoch { signals, label: e.label, subject_id: e.subject_id }
}

fn check_pair(a: &MixSample, b: &MixSample) -> Result<(), AugmentError> {
    if a.dims != b.dims || a.frames.len() != b.frames.len() {
        return Err(AugmentError::ShapeMismatch { a: a.dims, b: b.dims });
    }
    if a.label.len() != b.label.len() {
        return Err(AugmentError::LabelMismatch { a: a.label.len(), b: b.label.len() });
    }
    Ok(())
}

/// Weights (w_a, w_b) for mixing weight λ on `a`.
///
/// The larger weight is taken as given and the smaller one as its exact
/// complement, so `mixup(a, b, λ)` and `mixup(b, a, 1 − λ)` are bit-identical.
fn mix_weights(lambda: f64) -> (f64, f64) {
    if lambda >= 0.5 {
        (lambda, 1.0 - lambda)
    } else {
        let wb = 1.0 - lambda;
        (1.0 - wb, wb)
    }
}

/// Convex combination of two samples and their labels.
pub fn mixup(a: &MixSample, b: &MixSample, lambda: f64) -> Result<MixSample, AugmentError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(AugmentError::LambdaOutOfRange(lambda));
    }
    check_pair(a, b)?;
    let (wa, wb) = mix_weights(lambda);
    let combine = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(&p, &q)| wa * p + wb * q).collect();
    Ok(MixSample { frames: combine(&a.frames, &b.frames), dims: a.dims, label: combine(&a.label, &b.label) })
}

/// Pixel rectangle `[top, top+height) × [left, left+width)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Rect {
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
}

impl Rect {
    pub fn area(&self) -> usize {
        self.height * self.width
    }
}

/// Paste `rect` of every frame of `b` into `a`; b's label weight is the
/// pasted area fraction.
pub fn cutmix(a: &MixSample, b: &MixSample, rect: Rect) -> Result<MixSample, AugmentError> {
    check_pair(a, b)?;
    let (n, h, w) = a.dims;
    if rect.top + rect.height > h || rect.left + rect.width > w {
        return Err(AugmentError::RectOutOfBounds { rect, h, w });
    }
    let mut frames = a.frames.clone();
    for f in 0..n {
        for r in rect.top..rect.top + rect.height {
            let row = f * h * w + r * w;
            frames[row + rect.left..row + rect.left + rect.width]
                .copy_from_slice(&b.frames[row + rect.left..row + rect.left + rect.width]);
        }
    }
    let wb = rect.area() as f64 / (h * w) as f64;
    let wa = 1.0 - wb;
    let label = a.label.iter().zip(&b.label).map(|(&p, &q)| wa * p + wb * q).collect();
    Ok(MixSample { frames, dims: a.dims, label })
}

/// Random CutMix box: side lengths `floor(side · √(1 − λ))`, uniformly placed
/// center, clipped to the grid.
pub fn cutmix_rect<R: Rng>(h: usize, w: usize, lambda: f64, rng: &mut R) -> Rect {
    let ratio = (1.0 - lambda).max(0.0).sqrt();
    let cut_h = (h as f64 * ratio).floor() as i64;
    let cut_w = (w as f64 * ratio).floor() as i64;
    let cy = rng.random_range(0..h) as i64;
    let cx = rng.random_range(0..w) as i64;
    let top = (cy - cut_h / 2).clamp(0, h as i64);
    let bottom = (cy + cut_h / 2).clamp(0, h as i64);
    let left = (cx - cut_w / 2).clamp(0, w as i64);
    let right = (cx + cut_w / 2).clamp(0, w as i64);
    Rect { top: top as usize, left: left as usize, height: (bottom - top) as usize, width: (right - left) as usize }
}

/// Batch-level MixUp/CutMix settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixConfig {
    pub mixup_alpha: f64,
    pub cutmix_alpha: f64,
    /// Probability of choosing CutMix over MixUp for a batch.
    pub cutmix_prob: f64,
}

impl Default for MixConfig {
    fn default() -> Self {
        MixConfig { mixup_alpha: 0.8, cutmix_alpha: 1.0, cutmix_prob: 0.5 }
    }
}

/// Mix every sample with its mirror in the batch (i with B−1−i) using one
/// λ per batch; exactly one of MixUp or CutMix is applied.
pub fn mix_batch<R: Rng>(
    samples: &[MixSample],
    cfg: &MixConfig,
    rng: &mut R,
) -> Result<Vec<MixSample>, AugmentError> {
    if samples.is_empty() {
        return Ok(Vec::new());
    }
    let use_cutmix = rng.random::<f64>() < cfg.cutmix_prob;
    let alpha = if use_cutmix { cfg.cutmix_alpha } else { cfg.mixup_alpha };
    let lambda: f64 = Beta::new(alpha, alpha).expect("positive alpha").sample(rng);
    let b = samples.len();
    if use_cutmix {
        let (_, h, w) = samples[0].dims;
        let rect = cutmix_rect(h, w, lambda, rng);
        (0..b).map(|i| cutmix(&samples[i], &samples[b - 1 - i], rect)).collect()
    } else {
        (0..b).map(|i| mixup(&samples[i], &samples[b - 1 - i], lambda)).collect()
    }
}
