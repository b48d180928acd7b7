use std::collections::BTreeSet;
use std::sync::Arc;

use super::HarnessError;
use crate::augment::gaussian_noise;
use crate::coords::{transform, TransformMethod, TsneParams};
use crate::exec::Execution;
use crate::ingest::{ElectrodeMontage, Epoch};
use crate::topomap::{build_assignment, build_sequence_with, scale_to_grid, Normalization, PixelAssignment, TopomapSequence};

/// Everything between raw epochs and rendered sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub transform: TransformMethod,
    pub tsne: TsneParams,
    pub grid_h: usize,
    pub grid_w: usize,
    pub n_frames: usize,
    pub normalization: Normalization,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            transform: TransformMethod::Tsne,
            tsne: TsneParams::default(),
            grid_h: 32,
            grid_w: 32,
            n_frames: 60,
            normalization: Normalization::ZScore,
        }
    }
}

/// Project the montage and compute the nearest-electrode pixel owners.
pub fn prepare_assignment(montage: &ElectrodeMontage, cfg: &PipelineConfig) -> Result<PixelAssignment, HarnessError> {
    let map = transform(montage, cfg.transform, &cfg.tsne)?;
    let pixels = scale_to_grid(&map, cfg.grid_h, cfg.grid_w)?;
    Ok(build_assignment(&pixels, cfg.grid_h, cfg.grid_w))
}

/// One rendered example. `raw` keeps the source epoch when available so
/// that signal noise can be added and the maps re-rendered.
#[derive(Debug, Clone)]
pub struct Sample {
    pub frames: Vec<f64>,
    pub label: usize,
    pub subject_id: u32,
    raw: Option<Arc<Epoch>>,
}

#[derive(Debug, Clone)]
struct Renderer {
    assignment: Arc<PixelAssignment>,
    n_frames: usize,
    normalization: Normalization,
}

/// Rendered map sequences for a set of subjects.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// (N, H, W)
    pub dims: (usize, usize, usize),
    pub num_classes: usize,
    pub samples: Vec<Sample>,
    renderer: Option<Renderer>,
}

impl Dataset {
    /// Render epochs through `assignment`; raw signals are retained for
    /// noise augmentation.
    pub fn from_epochs(
        epochs: Vec<Epoch>,
        assignment: PixelAssignment,
        n_frames: usize,
        normalization: Normalization,
        num_classes: usize,
        exec: Execution,
    ) -> Result<Self, HarnessError> {
        let renderer = Renderer { assignment: Arc::new(assignment), n_frames, normalization };
        let epochs: Vec<Arc<Epoch>> = epochs.into_iter().map(Arc::new).collect();
        let samples = exec.try_map(&epochs, |e| -> Result<Sample, HarnessError> {
            check_label(e.label, num_classes)?;
            let seq = build_sequence_with(e, &renderer.assignment, n_frames, normalization, Execution::Sequential)?;
            Ok(Sample { frames: seq.to_flat(), label: e.label, subject_id: e.subject_id, raw: Some(e.clone()) })
        })?;
        let a = &renderer.assignment;
        Ok(Dataset { dims: (n_frames, a.grid_h, a.grid_w), num_classes, samples, renderer: Some(renderer) })
    }

    /// Wrap cached sequences. Noise augmentation is unavailable for these.
    pub fn from_sequences(seqs: Vec<TopomapSequence>, num_classes: usize) -> Result<Self, HarnessError> {
        let dims = seqs.first().map(TopomapSequence::dims).ok_or(HarnessError::EmptySet)?;
        let samples = seqs
            .into_iter()
            .map(|s| {
                if s.dims() != dims {
                    return Err(HarnessError::DatasetMismatch(format!(
                        "sequence dims {:?} differ from {:?}",
                        s.dims(),
                        dims
                    )));
                }
                check_label(s.label, num_classes)?;
                Ok(Sample { frames: s.to_flat(), label: s.label, subject_id: s.subject_id, raw: None })
            })
            .collect::<Result<_, _>>()?;
        Ok(Dataset { dims, num_classes, samples, renderer: None })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Whether raw signals are kept for noise re-rendering.
    pub fn has_raw(&self) -> bool {
        self.renderer.is_some()
    }

    /// Sorted distinct subject ids.
    pub fn subjects(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.subject_id).collect::<BTreeSet<_>>().into_iter().collect()
    }

    /// Samples of the listed subjects, in dataset order. Every listed subject
    /// must contribute at least one sample.
    pub fn select(&self, subjects: &[u32]) -> Result<Vec<Sample>, HarnessError> {
        let present: BTreeSet<u32> = self.samples.iter().map(|s| s.subject_id).collect();
        if let Some(&missing) = subjects.iter().find(|s| !present.contains(s)) {
            return Err(HarnessError::MissingCache { subject: missing });
        }
        let wanted: BTreeSet<u32> = subjects.iter().copied().collect();
        Ok(self.samples.iter().filter(|s| wanted.contains(&s.subject_id)).cloned().collect())
    }

    /// Frames of `sample` rendered from its raw epoch plus Gaussian noise.
    pub fn noisy_frames(&self, sample: &Sample, scale: f64, seed: u64) -> Result<Vec<f64>, HarnessError> {
        let (Some(r), Some(raw)) = (&self.renderer, &sample.raw) else {
            return Err(HarnessError::NoRawSignals);
        };
        let noisy = gaussian_noise(raw, scale, seed);
        Ok(build_sequence_with(&noisy, &r.assignment, r.n_frames, r.normalization, Execution::Sequential)?.to_flat())
    }

    /// The rendered sequences, for caching.
    pub fn sequences(&self) -> Vec<TopomapSequence> {
        let (n, h, w) = self.dims;
        self.samples.iter().map(|s| TopomapSequence::from_flat(&s.frames, n, h, w, s.label, s.subject_id)).collect()
    }
}

fn check_label(label: usize, num_classes: usize) -> Result<(), HarnessError> {
    if label >= num_classes {
        return Err(HarnessError::DatasetMismatch(format!("label {label} outside {num_classes} classes")));
    }
    Ok(())
}
