use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use super::HarnessError;
use crate::rng::{child_seed, rng_from_seed};

/// Subjects left out of every split (recordings with known annotation defects
/// in the public motor-imagery dataset).
pub const EXCLUDED_SUBJECTS: [u32; 6] = [38, 88, 89, 92, 100, 104];
pub const N_FOLDS: usize = 5;
/// Share of the non-test subjects that go to training; the rest validate.
const TRAIN_SHARE: f64 = 0.875;

/// Subject assignment for one cross-subject fold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldPlan {
    pub fold_id: usize,
    pub test_subjects: Vec<u32>,
    pub train_subjects: Vec<u32>,
    pub val_subjects: Vec<u32>,
}

impl FoldPlan {
    pub fn all_subjects(&self) -> impl Iterator<Item = u32> + '_ {
        self.train_subjects.iter().chain(&self.val_subjects).chain(&self.test_subjects).copied()
    }
}

/// Shuffle the included subjects into five blocks (sizes differ by at most
/// one, larger blocks first). Fold f tests on block f; the other blocks are
/// reshuffled per fold and split floor(0.875·k) train, rest validation.
///
/// Subject lists inside each plan are sorted.
pub fn split_subjects(subjects: &[u32], seed: u64) -> Result<Vec<FoldPlan>, HarnessError> {
    let included: BTreeSet<u32> = subjects.iter().copied().filter(|s| !EXCLUDED_SUBJECTS.contains(s)).collect();
    if included.len() < N_FOLDS {
        return Err(HarnessError::TooFewSubjects { found: included.len(), needed: N_FOLDS });
    }
    let mut order: Vec<u32> = included.into_iter().collect();
    order.shuffle(&mut rng_from_seed(seed));

    let (base, extra) = (order.len() / N_FOLDS, order.len() % N_FOLDS);
    let mut blocks = Vec::with_capacity(N_FOLDS);
    let mut start = 0;
    for b in 0..N_FOLDS {
        let size = base + usize::from(b < extra);
        blocks.push(order[start..start + size].to_vec());
        start += size;
    }

    Ok((0..N_FOLDS)
        .map(|f| {
            let mut rest: Vec<u32> = blocks.iter().enumerate().filter(|(b, _)| *b != f).flat_map(|(_, v)| v.clone()).collect();
            rest.shuffle(&mut rng_from_seed(child_seed(seed, f as u64)));
            let n_train = (TRAIN_SHARE * rest.len() as f64).floor() as usize;
            let mut train = rest[..n_train].to_vec();
            let mut val = rest[n_train..].to_vec();
            let mut test = blocks[f].clone();
            train.sort_unstable();
            val.sort_unstable();
            test.sort_unstable();
            FoldPlan { fold_id: f, test_subjects: test, train_subjects: train, val_subjects: val }
        })
        .collect())
}
