use super::dataset::Sample;
use super::HarnessError;
use crate::exec::Execution;
use crate::model::{predict, StPoolModel};

/// Classification results. Confusion rows are true classes, columns predictions.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    pub confusion: Vec<Vec<usize>>,
    /// NaN for classes absent from the evaluated set.
    pub per_class_recall: Vec<f64>,
    pub loss_curve: Vec<f64>,
}

impl Metrics {
    /// Build from (true, predicted) pairs.
    pub fn from_pairs(pairs: &[(usize, usize)], num_classes: usize) -> Result<Self, HarnessError> {
        if pairs.is_empty() {
            return Err(HarnessError::EmptySet);
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for &(t, p) in pairs {
            confusion[t][p] += 1;
        }
        let hits: usize = (0..num_classes).map(|c| confusion[c][c]).sum();
        let per_class_recall = confusion
            .iter()
            .enumerate()
            .map(|(c, row)| {
                let n: usize = row.iter().sum();
                if n == 0 {
                    f64::NAN
                } else {
                    row[c] as f64 / n as f64
                }
            })
            .collect();
        Ok(Metrics { accuracy: hits as f64 / pairs.len() as f64, confusion, per_class_recall, loss_curve: Vec::new() })
    }

    pub fn n_samples(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

/// Augmentation-free argmax evaluation.
pub fn evaluate(model: &StPoolModel, samples: &[Sample], exec: Execution) -> Result<Metrics, HarnessError> {
    if samples.is_empty() {
        return Err(HarnessError::EmptySet);
    }
    let pairs = exec.try_map(samples, |s| predict(model, &s.frames).map(|p| (s.label, p)))?;
    Metrics::from_pairs(&pairs, model.config.num_classes)
}
