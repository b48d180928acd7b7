use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use super::dataset::{prepare_assignment, Dataset, PipelineConfig};
use super::split::split_subjects;
use super::train::{run_fold, TrainConfig};
use super::HarnessError;
use crate::coords::TransformMethod;
use crate::ingest::{ElectrodeMontage, Epoch};
use crate::model::{Mixer, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AblationAxis {
    Transform,
    Mixer,
    NFrames,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::Transform => "transform",
            AblationAxis::Mixer => "mixer",
            AblationAxis::NFrames => "n_frames",
        }
    }

    /// Values compared when none are given.
    pub fn default_values(self) -> Vec<String> {
        let v: &[&str] = match self {
            AblationAxis::Transform => &["parallel", "azimuthal", "tsne"],
            AblationAxis::Mixer => &["stpool", "none"],
            AblationAxis::NFrames => &["30", "60", "96", "120"],
        };
        v.iter().map(|s| s.to_string()).collect()
    }
}

impl fmt::Display for AblationAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AblationAxis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "transform" => Ok(AblationAxis::Transform),
            "mixer" => Ok(AblationAxis::Mixer),
            "n_frames" | "frames" => Ok(AblationAxis::NFrames),
            _ => Err(format!("unknown ablation axis {s:?} (expected transform, mixer or n_frames)")),
        }
    }
}

/// Raw material for an ablation: every variant re-renders from these epochs.
#[derive(Debug, Clone)]
pub struct AblationInputs {
    pub epochs: Vec<Epoch>,
    pub montage: ElectrodeMontage,
    pub num_classes: usize,
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// Split seed; also recorded in every row.
    pub split_seed: u64,
    /// Which of the five folds to run.
    pub fold: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub axis: AblationAxis,
    pub value: String,
    pub seed: u64,
    pub best_val_acc: f64,
    pub test_acc: f64,
}

/// One train/evaluate cycle per axis value, all under the same seeds and fold.
pub fn run_ablation(
    axis: AblationAxis,
    values: &[String],
    inputs: &AblationInputs,
) -> Result<Vec<AblationRow>, HarnessError> {
    let window = inputs.epochs.first().map_or(0, Epoch::n_samples);
    let invalid = |value: &str, reason: String| HarnessError::InvalidAxisValue { axis: axis.name(), value: value.to_string(), reason };

    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut pipeline = inputs.pipeline.clone();
        let mut model = inputs.model.clone();
        match axis {
            AblationAxis::Transform => {
                let t: TransformMethod = value.parse().map_err(|e: String| invalid(value, e))?;
                if t == TransformMethod::SvdInit {
                    return Err(invalid(value, "expected parallel, azimuthal or tsne".into()));
                }
                pipeline.transform = t;
            }
            AblationAxis::Mixer => model.mixer = value.parse::<Mixer>().map_err(|e| invalid(value, e))?,
            AblationAxis::NFrames => {
                let n: usize = value.parse().map_err(|_| invalid(value, "not a positive integer".into()))?;
                if n == 0 || !window.is_multiple_of(n) {
                    return Err(invalid(value, format!("does not divide the {window}-sample window")));
                }
                pipeline.n_frames = n;
                model.n_frames = n;
            }
        }
        let assignment = prepare_assignment(&inputs.montage, &pipeline)?;
        let data = Dataset::from_epochs(
            inputs.epochs.clone(),
            assignment,
            pipeline.n_frames,
            pipeline.normalization,
            inputs.num_classes,
            inputs.train.execution,
        )?;
        let plans = split_subjects(&data.subjects(), inputs.split_seed)?;
        let plan = plans.get(inputs.fold).ok_or_else(|| invalid(value, format!("fold {} out of range", inputs.fold)))?;
        let report = run_fold(plan, &data, &model, &inputs.train)?;
        rows.push(AblationRow {
            axis,
            value: value.clone(),
            seed: inputs.train.seed,
            best_val_acc: report.result.best_val_acc.unwrap_or(f64::NAN),
            test_acc: report.test.accuracy,
        });
    }
    Ok(rows)
}

/// `axis,value,seed,best_val_acc,test_acc` rows.
pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut s = String::from("axis,value,seed,best_val_acc,test_acc\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{}", r.axis, r.value, r.seed, r.best_val_acc, r.test_acc);
    }
    s
}
