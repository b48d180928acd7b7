use std::path::PathBuf;

use log::{debug, info};
use rand::seq::SliceRandom;

use super::dataset::{Dataset, Sample};
use super::metrics::{evaluate, Metrics};
use super::split::FoldPlan;
use super::HarnessError;
use crate::augment::{mix_batch, MixConfig, MixSample, SoftLabeledBatch};
use crate::exec::Execution;
use crate::model::{adam_step, loss_and_grad, save_checkpoint, AdamConfig, AdamState, Mode, ModelConfig, StPoolModel};
use crate::rng::{derive_seed, rng_from_seed};

// Seed-path labels for the independent random streams of an epoch.
const STREAM_ORDER: u64 = 0;
const STREAM_NOISE: u64 = 1;
const STREAM_MIX: u64 = 2;
const STREAM_DROPOUT: u64 = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Standard deviation of the signal noise; 0 disables it.
    pub noise_scale: f64,
    /// MixUp/CutMix on training batches.
    pub mix: bool,
    pub mix_config: MixConfig,
    pub seed: u64,
    pub execution: Execution,
    /// Where to write the model state if the loss diverges.
    pub dump_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 50,
            batch_size: 8,
            lr: 1e-4,
            noise_scale: 1e-4,
            mix: true,
            mix_config: MixConfig::default(),
            seed: 0,
            execution: Execution::default(),
            dump_dir: None,
        }
    }
}

impl TrainConfig {
    /// No noise and no mixing.
    pub fn without_augmentation(mut self) -> Self {
        self.noise_scale = 0.0;
        self.mix = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    /// Mean batch loss on augmented training batches.
    pub train_loss: f64,
    /// Clean (augmentation-free) accuracy on the training subjects.
    pub train_acc: f64,
    pub val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold_id: usize,
    /// Checkpoint with the best validation accuracy (the initialization when
    /// no epoch ran).
    pub model: StPoolModel,
    pub best_epoch: Option<usize>,
    pub best_val_acc: Option<f64>,
    pub history: Vec<EpochRecord>,
}

/// Train on the plan's training subjects, selecting the epoch with the
/// highest validation accuracy (earliest wins ties).
pub fn train_fold(
    plan: &FoldPlan,
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<FoldResult, HarnessError> {
    if model_cfg.num_classes != data.num_classes || model_cfg.n_frames != data.dims.0 || (model_cfg.h, model_cfg.w) != (data.dims.1, data.dims.2) {
        return Err(HarnessError::DatasetMismatch(format!(
            "model expects {} classes and {}x{}x{} frames; data has {} classes and {:?}",
            model_cfg.num_classes, model_cfg.n_frames, model_cfg.h, model_cfg.w, data.num_classes, data.dims
        )));
    }
    let train = data.select(&plan.train_subjects)?;
    let val = data.select(&plan.val_subjects)?;
    let use_noise = cfg.noise_scale > 0.0;
    if use_noise && !data.has_raw() {
        return Err(HarnessError::NoRawSignals);
    }
    if cfg.batch_size == 0 {
        return Err(HarnessError::DatasetMismatch("batch size must be positive".into()));
    }

    let mut model = StPoolModel::new(model_cfg.clone())?;
    let mut adam = AdamState::new(&model.params);
    let adam_cfg = AdamConfig { lr: cfg.lr, ..AdamConfig::default() };
    let mut best: Option<(usize, f64, StPoolModel)> = None;
    let mut history = Vec::with_capacity(cfg.epochs);
    let (n, h, w) = data.dims;

    for epoch in 1..=cfg.epochs {
        let e = epoch as u64;
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut rng_from_seed(derive_seed(cfg.seed, &[e, STREAM_ORDER])));

        let mut loss_sum = 0.0;
        let mut n_batches = 0usize;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let bb = b as u64;
            let samples: Vec<MixSample> = cfg.execution.try_map(chunk, |&i| -> Result<MixSample, HarnessError> {
                let s: &Sample = &train[i];
                let frames = if use_noise {
                    data.noisy_frames(s, cfg.noise_scale, derive_seed(cfg.seed, &[e, STREAM_NOISE, i as u64]))?
                } else {
                    s.frames.clone()
                };
                Ok(MixSample::hard(frames, (n, h, w), s.label, data.num_classes))
            })?;
            let samples = if cfg.mix {
                mix_batch(&samples, &cfg.mix_config, &mut rng_from_seed(derive_seed(cfg.seed, &[e, STREAM_MIX, bb])))?
            } else {
                samples
            };
            let mut batch = SoftLabeledBatch::default();
            samples.into_iter().for_each(|s| batch.push(s));

            let mode = Mode::Train { dropout_seed: derive_seed(cfg.seed, &[e, STREAM_DROPOUT, bb]) };
            let g = loss_and_grad(&model, &batch, mode, cfg.execution)?;
            if !g.loss.is_finite() || !g.grads.is_finite() {
                let dump = match &cfg.dump_dir {
                    Some(dir) => {
                        std::fs::create_dir_all(dir)?;
                        let p = dir.join(format!("diverged_fold{}_epoch{epoch}_batch{b}.ckpt", plan.fold_id));
                        save_checkpoint(&model, &p)?;
                        Some(p)
                    }
                    None => None,
                };
                return Err(HarnessError::DivergedLoss { epoch, batch: b, dump });
            }
            adam_step(&mut model.params, &g.grads, &mut adam, &adam_cfg)?;
            loss_sum += g.loss;
            n_batches += 1;
        }

        let train_acc = evaluate(&model, &train, cfg.execution)?.accuracy;
        let val_acc = evaluate(&model, &val, cfg.execution)?.accuracy;
        let train_loss = if n_batches == 0 { f64::NAN } else { loss_sum / n_batches as f64 };
        debug!("fold {} epoch {epoch}: loss {train_loss:.5} train_acc {train_acc:.4} val_acc {val_acc:.4}", plan.fold_id);
        history.push(EpochRecord { epoch, train_loss, train_acc, val_acc });
        if best.as_ref().is_none_or(|(_, acc, _)| val_acc > *acc) {
            best = Some((epoch, val_acc, model.clone()));
        }
    }

    Ok(match best {
        Some((epoch, acc, m)) => {
            info!("fold {}: best validation accuracy {acc:.4} at epoch {epoch}", plan.fold_id);
            FoldResult { fold_id: plan.fold_id, model: m, best_epoch: Some(epoch), best_val_acc: Some(acc), history }
        }
        None => FoldResult { fold_id: plan.fold_id, model, best_epoch: None, best_val_acc: None, history },
    })
}

/// A trained fold plus its held-out evaluation.
#[derive(Debug, Clone)]
pub struct FoldReport {
    pub result: FoldResult,
    /// Test-subject metrics of the selected checkpoint; `loss_curve` holds the
    /// per-epoch training loss.
    pub test: Metrics,
}

pub fn run_fold(
    plan: &FoldPlan,
    data: &Dataset,
    model_cfg: &ModelConfig,
    cfg: &TrainConfig,
) -> Result<FoldReport, HarnessError> {
    let result = train_fold(plan, data, model_cfg, cfg)?;
    let test_samples = data.select(&plan.test_subjects)?;
    let mut test = evaluate(&result.model, &test_samples, cfg.execution)?;
    test.loss_curve = result.history.iter().map(|r| r.train_loss).collect();
    Ok(FoldReport { result, test })
}
