//! Subject-exclusive test split and validation folds.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::MlError;
use crate::rng::stream;

pub const MIN_SUBJECTS: usize = 5;
pub const N_FOLDS: usize = 10;
pub const TEST_FRACTION: f64 = 0.22;
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub validation: Vec<String>,
    pub training: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub test_subjects: Vec<String>,
    pub train_subjects: Vec<String>,
    pub folds: Vec<Fold>,
    pub seed: u64,
}

/// Test size is `round(0.22 n)` (at least one); validation size per fold is
/// `ceil(0.2 n_train)`. Folds consume a seeded shuffle of the training
/// subjects and reshuffle once it runs out.
pub fn make_split_plan(subject_ids: &[String], seed: u64) -> Result<SplitPlan, MlError> {
    let mut ids: Vec<String> = subject_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() < MIN_SUBJECTS {
        return Err(MlError::TooFewSubjects {
            got: ids.len(),
            min: MIN_SUBJECTS,
        });
    }
    ids.shuffle(&mut stream(seed, "split-test", 0));
    let n_test = ((TEST_FRACTION * ids.len() as f64).round() as usize).max(1);
    let mut test_subjects = ids[..n_test].to_vec();
    let mut train_subjects = ids[n_test..].to_vec();
    test_subjects.sort();
    train_subjects.sort();

    let n_val = (VALIDATION_FRACTION * train_subjects.len() as f64).ceil() as usize;
    let mut folds = Vec::with_capacity(N_FOLDS);
    let mut pool: Vec<String> = Vec::new();
    let mut round = 0;
    while folds.len() < N_FOLDS {
        if pool.len() < n_val {
            pool = train_subjects.clone();
            pool.shuffle(&mut stream(seed, "split-folds", round));
            round += 1;
        }
        let mut validation: Vec<String> = pool.drain(..n_val).collect();
        validation.sort();
        let training = train_subjects
            .iter()
            .filter(|s| !validation.contains(s))
            .cloned()
            .collect();
        folds.push(Fold { validation, training });
    }
    let plan = SplitPlan {
        test_subjects,
        train_subjects,
        folds,
        seed,
    };
    plan.check()?;
    Ok(plan)
}

impl SplitPlan {
    /// Every boundary of the plan separates disjoint subject sets.
    pub fn check(&self) -> Result<(), MlError> {
        assert_disjoint(&self.test_subjects, &self.train_subjects)?;
        for f in &self.folds {
            assert_disjoint(&f.validation, &f.training)?;
            assert_disjoint(&f.validation, &self.test_subjects)?;
            assert_disjoint(&f.training, &self.test_subjects)?;
        }
        Ok(())
    }
}

pub fn assert_disjoint<S: AsRef<str>>(a: &[S], b: &[S]) -> Result<(), MlError> {
    let set: HashSet<&str> = a.iter().map(AsRef::as_ref).collect();
    match b.iter().find(|s| set.contains(s.as_ref())) {
        Some(s) => Err(MlError::Leakage(s.as_ref().to_string())),
        None => Ok(()),
    }
}
