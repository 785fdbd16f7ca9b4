//! Deterministic k-fold assignment, stratified by default.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One fold index per instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    assignments: Vec<usize>,
    pub k: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl FoldPlan {
    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    /// Instance indices for (train, test) of one fold, in dataset order.
    pub fn split(&self, fold: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &f) in self.assignments.iter().enumerate() {
            if f == fold {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }
}

/// Assign each instance to one of `k` folds. With stratification (the
/// default) each class is shuffled separately and dealt round-robin, so
/// per-fold class counts differ by at most one from proportional.
pub fn make_folds(labels: &[usize], k: usize, seed: u64, stratified: bool) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    if labels.len() < k {
        return Err(Error::Config(format!(
            "cannot split {} instances into {k} folds",
            labels.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignments = vec![0usize; labels.len()];
    if stratified {
        let max_class = labels.iter().copied().max().unwrap_or(0);
        for class in 0..=max_class {
            let mut members: Vec<usize> = labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == class)
                .map(|(i, _)| i)
                .collect();
            if members.is_empty() {
                continue;
            }
            if members.len() < k {
                return Err(Error::Config(format!(
                    "class {class} has only {} instances, fewer than k={k}; \
                     use fewer folds or disable stratification",
                    members.len()
                )));
            }
            members.shuffle(&mut rng);
            for (pos, &i) in members.iter().enumerate() {
                assignments[i] = pos % k;
            }
        }
    } else {
        let mut order: Vec<usize> = (0..labels.len()).collect();
        order.shuffle(&mut rng);
        for (pos, &i) in order.iter().enumerate() {
            assignments[i] = pos % k;
        }
    }
    Ok(FoldPlan {
        assignments,
        k,
        seed,
        stratified,
    })
}
