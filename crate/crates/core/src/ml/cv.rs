//! Leave-subjects-out cross-validation, learning curves and model selection.

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::score;
use super::models::fit_model;
use super::split::assert_disjoint;
use super::{Algorithm, Dataset, Hyperparams, MlError, SplitPlan};
use crate::rng::{derive_seed, stream};
use crate::stats::{mean, population_std};

/// Candidates within this much of the best mean CV score are compared by
/// learning-curve gap.
pub const SELECTION_DELTA: f64 = 0.02;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScores {
    /// Folds with no validation rows or a single training class are skipped.
    pub fold_scores: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl CvScores {
    fn from_scores(fold_scores: Vec<f64>) -> Result<Self, MlError> {
        if fold_scores.is_empty() {
            return Err(MlError::NoValidationRows);
        }
        Ok(Self {
            mean: mean(&fold_scores),
            std: population_std(&fold_scores),
            fold_scores,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningPoint {
    pub fraction: f64,
    pub train: CvScores,
    pub validation: CvScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub algorithm: Algorithm,
    pub points: Vec<LearningPoint>,
}

/// Train and validation score of each usable fold, in fold order.
fn fold_pairs(
    algorithm: Algorithm,
    hp: &Hyperparams,
    data: &Dataset,
    plan: &SplitPlan,
    fraction: f64,
    seed: u64,
) -> Result<Vec<(f64, f64)>, MlError> {
    let k = data.n_classes();
    let results: Vec<Result<Option<(f64, f64)>, MlError>> = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(f, fold)| {
            let mut subjects = fold.training.clone();
            if fraction < 1.0 {
                subjects.shuffle(&mut stream(seed, "lc-subjects", f as u64));
                let keep = ((fraction * subjects.len() as f64).ceil() as usize).clamp(1, subjects.len());
                subjects.truncate(keep);
            }
            let tr = data.rows_of(&subjects);
            let va = data.rows_of(&fold.validation);
            let tr_groups: Vec<&str> = tr.iter().map(|&i| data.groups[i].as_str()).collect();
            let va_groups: Vec<&str> = va.iter().map(|&i| data.groups[i].as_str()).collect();
            assert_disjoint(&tr_groups, &va_groups)?;
            if va.is_empty() || tr.is_empty() {
                return Ok(None);
            }
            let train = data.subset(&tr);
            let model = match fit_model(algorithm, hp, &train.x, &train.y, k, derive_seed(seed, "fold", f as u64)) {
                Ok(m) => m,
                Err(MlError::SingleClass) => {
                    warn!("fold {f}: single training class, skipped");
                    return Ok(None);
                }
                Err(e) => return Err(e),
            };
            let valid = data.subset(&va);
            let s_train = score(&train.y, &model.predict(&train.x), k)?;
            let s_val = score(&valid.y, &model.predict(&valid.x), k)?;
            Ok(Some((s_train, s_val)))
        })
        .collect();
    let mut out = Vec::new();
    for r in results {
        if let Some(p) = r? {
            out.push(p);
        }
    }
    Ok(out)
}

/// Fold score is positive-class F-1 for two classes, weighted F-1 otherwise.
pub fn cross_validate(
    algorithm: Algorithm,
    hp: &Hyperparams,
    data: &Dataset,
    plan: &SplitPlan,
    seed: u64,
) -> Result<CvScores, MlError> {
    let pairs = fold_pairs(algorithm, hp, data, plan, 1.0, seed)?;
    CvScores::from_scores(pairs.into_iter().map(|p| p.1).collect())
}

/// Fractions are of training subjects within each fold. A fraction of 1.0
/// reproduces [`cross_validate`].
pub fn learning_curve(
    algorithm: Algorithm,
    hp: &Hyperparams,
    data: &Dataset,
    plan: &SplitPlan,
    fractions: &[f64],
    seed: u64,
) -> Result<LearningCurve, MlError> {
    let points = fractions
        .iter()
        .map(|&fraction| {
            let pairs = fold_pairs(algorithm, hp, data, plan, fraction, seed)?;
            Ok(LearningPoint {
                fraction,
                train: CvScores::from_scores(pairs.iter().map(|p| p.0).collect())?,
                validation: CvScores::from_scores(pairs.iter().map(|p| p.1).collect())?,
            })
        })
        .collect::<Result<_, MlError>>()?;
    Ok(LearningCurve { algorithm, points })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub algorithm: Algorithm,
    pub cv: CvScores,
    pub train_mean: f64,
    /// Train minus validation mean at full training size.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: Algorithm,
    /// In the order evaluated.
    pub candidates: Vec<CandidateScore>,
}

/// Choose among candidates already scored.
pub fn choose(candidates: &[CandidateScore]) -> Option<Algorithm> {
    let top = candidates.iter().map(|c| c.cv.mean).fold(f64::NEG_INFINITY, f64::max);
    let mut near: Vec<&CandidateScore> = candidates.iter().filter(|c| c.cv.mean >= top - SELECTION_DELTA).collect();
    near.sort_by(|a, b| b.gap.total_cmp(&a.gap).then(a.algorithm.cmp(&b.algorithm)));
    near.first().map(|c| c.algorithm)
}

/// Rank by mean CV score with default hyperparameters; among candidates
/// within [`SELECTION_DELTA`] of the best, the larger train-validation gap
/// wins, then the earlier algorithm name.
pub fn select_model(
    data: &Dataset,
    plan: &SplitPlan,
    algorithms: &[Algorithm],
    seed: u64,
) -> Result<Selection, MlError> {
    let mut candidates = Vec::new();
    for &a in algorithms {
        let hp = a.default_hyperparameters();
        match fold_pairs(a, &hp, data, plan, 1.0, seed) {
            Ok(pairs) if !pairs.is_empty() => {
                let train: Vec<f64> = pairs.iter().map(|p| p.0).collect();
                let cv = CvScores::from_scores(pairs.iter().map(|p| p.1).collect())?;
                let train_mean = mean(&train);
                candidates.push(CandidateScore {
                    algorithm: a,
                    gap: train_mean - cv.mean,
                    train_mean,
                    cv,
                });
            }
            Ok(_) => warn!("{a}: no usable folds"),
            Err(e @ MlError::Leakage(_)) => return Err(e),
            Err(e) => warn!("{a}: {e}"),
        }
    }
    let chosen = choose(&candidates).ok_or(MlError::NoValidationRows)?;
    Ok(Selection { chosen, candidates })
}
