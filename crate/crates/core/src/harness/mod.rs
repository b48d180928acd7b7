//! Cross-subject experiments: fold planning, training with validation-based
//! model selection, evaluation, ablations and result files.

mod ablation;
mod dataset;
mod metrics;
mod output;
mod split;
mod train;

use std::path::PathBuf;

use thiserror::Error;

use crate::augment::AugmentError;
use crate::coords::CoordError;
use crate::error::ErrorKind;
use crate::ingest::IngestError;
use crate::model::ModelError;
use crate::topomap::TopomapError;

pub use ablation::{ablation_csv, run_ablation, AblationAxis, AblationInputs, AblationRow};
pub use dataset::{prepare_assignment, Dataset, PipelineConfig, Sample};
pub use metrics::{evaluate, Metrics};
pub use output::{confusion_csv, format_manifest, history_csv, write_fold_outputs};
pub use split::{split_subjects, FoldPlan, EXCLUDED_SUBJECTS, N_FOLDS};
pub use train::{run_fold, train_fold, EpochRecord, FoldReport, FoldResult, TrainConfig};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("need at least {needed} included subjects, found {found}")]
    TooFewSubjects { found: usize, needed: usize },
    #[error("nothing to evaluate: empty sample set")]
    EmptySet,
    #[error("no cached sequences for subject {subject}")]
    MissingCache { subject: u32 },
    #[error("non-finite loss at epoch {epoch}, batch {batch}{}", dump.as_ref().map(|p| format!(" (state dumped to {})", p.display())).unwrap_or_default())]
    DivergedLoss { epoch: usize, batch: usize, dump: Option<PathBuf> },
    #[error("invalid {axis} value {value:?}: {reason}")]
    InvalidAxisValue { axis: &'static str, value: String, reason: String },
    #[error("dataset mismatch: {0}")]
    DatasetMismatch(String),
    #[error("no noise re-rendering possible: dataset was built from cached sequences")]
    NoRawSignals,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Coord(#[from] CoordError),
    #[error(transparent)]
    Topomap(#[from] TopomapError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub(crate) fn kind(&self) -> ErrorKind {
        match self {
            HarnessError::DivergedLoss { .. } => ErrorKind::Numeric,
            HarnessError::Io(_) | HarnessError::Topomap(TopomapError::Io(_)) | HarnessError::Model(ModelError::Io(_)) => {
                ErrorKind::Io
            }
            HarnessError::Coord(CoordError::NonConvergedBandwidth { .. }) => ErrorKind::Numeric,
            _ => ErrorKind::Input,
        }
    }
}
