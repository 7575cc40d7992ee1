//! Classifier training, subject-exclusive validation and model search.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod artifact;
mod cv;
mod matrix;
mod metrics;
pub mod models;
mod pipeline;
mod rfecv;
mod scaler;
mod split;
mod tpe;

pub use artifact::{load_artifact, save_artifact, train, ModelArtifact, ARTIFACT_VERSION};
pub use cv::{
    cross_validate, learning_curve, select_model, CandidateScore, CvScores, LearningCurve,
    LearningPoint, Selection, SELECTION_DELTA,
};
pub use matrix::{Dataset, Matrix};
pub use metrics::{evaluate, score, ClassMetrics, EvalReport};
pub use models::TrainedModel;
pub use pipeline::{
    build_dataset, task_dataset, run_pipeline, PipelineConfig, PipelineResult, StageReport, Task,
};
pub use rfecv::{feature_importance, rfecv, RfecvResult, RfecvStep};
pub use scaler::{apply_scaler, fit_scaler, DropReason, ScalerStats, MAX_NAN_FRACTION};
pub use split::{assert_disjoint, make_split_plan, Fold, SplitPlan, MIN_SUBJECTS, N_FOLDS};
pub use tpe::{tpe_maximize, tpe_optimize, Trial, TpeConfig, TpeResult};

use crate::labeling::LabelError;

#[derive(Debug, Error)]
pub enum MlError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    Empty,
    #[error("non-finite value in model input")]
    NonFinite,
    #[error("training labels contain a single class")]
    SingleClass,
    #[error("class label {0} out of range")]
    InvalidLabel(usize),
    #[error("unknown feature {0}")]
    UnknownFeature(String),
    #[error("need at least {min} subjects, got {got}")]
    TooFewSubjects { got: usize, min: usize },
    #[error("subject {0} appears on both sides of a split")]
    Leakage(String),
    #[error("empty search space")]
    EmptySearchSpace,
    #[error("budget {budget} is below the {n_startup} startup trials")]
    BudgetTooSmall { budget: usize, n_startup: usize },
    #[error("invalid hyperparameter {name} = {value}")]
    InvalidHyperparameter { name: String, value: f64 },
    #[error("no labeled rows")]
    NoLabeledRows,
    #[error("the POTP task needs thresholds")]
    MissingThresholds,
    #[error("artifact version {found} is not supported (expected {expected})")]
    ArtifactVersion { found: u32, expected: u32 },
    #[error("all validation folds are empty")]
    NoValidationRows,
    #[error(transparent)]
    Label(#[from] LabelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The eight families, declared in name order so `Ord` is the tie-break.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    DTC,
    GNB,
    KNN,
    LDA,
    LogReg,
    RF,
    SVM,
    XGB,
}

impl Algorithm {
    pub const ALL: [Algorithm; 8] = [
        Algorithm::DTC,
        Algorithm::GNB,
        Algorithm::KNN,
        Algorithm::LDA,
        Algorithm::LogReg,
        Algorithm::RF,
        Algorithm::SVM,
        Algorithm::XGB,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::DTC => "DTC",
            Algorithm::GNB => "GNB",
            Algorithm::KNN => "KNN",
            Algorithm::LDA => "LDA",
            Algorithm::LogReg => "LogReg",
            Algorithm::RF => "RF",
            Algorithm::SVM => "SVM",
            Algorithm::XGB => "XGB",
        }
    }

    /// Defaults used before any tuning.
    pub fn default_hyperparameters(self) -> Hyperparams {
        let pairs: &[(&str, f64)] = match self {
            Algorithm::LogReg => &[("lambda", 1e-2)],
            Algorithm::DTC => &[("max_depth", 8.0), ("min_leaf", 2.0)],
            Algorithm::KNN => &[("k", 5.0)],
            Algorithm::LDA => &[("shrinkage", 0.1)],
            Algorithm::GNB => &[],
            Algorithm::SVM => &[("C", 1.0), ("gamma", 0.02)],
            Algorithm::RF => &[("n_trees", 100.0), ("max_depth", 10.0)],
            Algorithm::XGB => &[("eta", 0.1), ("rounds", 100.0), ("max_depth", 4.0), ("lambda", 1.0)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    pub fn search_space(self) -> Vec<ParamSpec> {
        use ParamKind::*;
        let p = |name: &str, kind| ParamSpec { name: name.to_string(), kind };
        match self {
            Algorithm::LogReg => vec![p("lambda", LogUniform { lo: 1e-4, hi: 10.0 })],
            Algorithm::DTC => vec![p("max_depth", Int { lo: 2, hi: 20 }), p("min_leaf", Int { lo: 1, hi: 20 })],
            Algorithm::KNN => vec![p("k", OddInt { lo: 1, hi: 25 })],
            Algorithm::LDA => vec![p("shrinkage", Uniform { lo: 0.0, hi: 1.0 })],
            Algorithm::GNB => vec![],
            Algorithm::SVM => vec![
                p("C", LogUniform { lo: 0.01, hi: 100.0 }),
                p("gamma", LogUniform { lo: 1e-4, hi: 10.0 }),
            ],
            Algorithm::RF => vec![p("n_trees", Int { lo: 50, hi: 500 }), p("max_depth", Int { lo: 2, hi: 20 })],
            Algorithm::XGB => vec![
                p("eta", LogUniform { lo: 0.01, hi: 0.3 }),
                p("rounds", Int { lo: 50, hi: 500 }),
                p("max_depth", Int { lo: 2, hi: 8 }),
                p("lambda", LogUniform { lo: 0.1, hi: 10.0 }),
            ],
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// Named numeric hyperparameters. Integers are stored as whole floats.
pub type Hyperparams = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParamKind {
    Uniform { lo: f64, hi: f64 },
    LogUniform { lo: f64, hi: f64 },
    Int { lo: i64, hi: i64 },
    OddInt { lo: i64, hi: i64 },
    Categorical { choices: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub kind: ParamKind,
}

pub(crate) fn hp_get(hp: &Hyperparams, algorithm: Algorithm, name: &str) -> f64 {
    hp.get(name)
        .copied()
        .or_else(|| algorithm.default_hyperparameters().get(name).copied())
        .unwrap_or(f64::NAN)
}

/// Index of the largest value; the first wins ties.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = (*x - m).exp();
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}
