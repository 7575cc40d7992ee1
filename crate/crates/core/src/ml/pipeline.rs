//! End-to-end model search: scale, split, select, tune, eliminate, retune, test.

use std::fmt;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use super::cv::{learning_curve, select_model, CvScores, LearningCurve, Selection};
use super::metrics::evaluate;
use super::models::fit_model;
use super::rfecv::{rfecv, RfecvResult};
use super::scaler::{apply_scaler, fit_scaler, ScalerStats};
use super::split::{assert_disjoint, make_split_plan, SplitPlan};
use super::tpe::{tpe_optimize, TpeConfig, TpeResult};
use super::{Algorithm, Dataset, EvalReport, Hyperparams, Matrix, MlError, ModelArtifact, ARTIFACT_VERSION};
use crate::data::FeatureMatrix;
use crate::labeling::{assign_labels, fit_potp_thresholds_with, group_state_with, LabeledDataset, PotpLabel, PotpThresholds, StateLabel, ThresholdOverride, TimeError};
use crate::rng::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Emotional / Neutral / Cognitive.
    State3,
    /// Slower / Faster.
    Potp2,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::State3 => "state3",
            Task::Potp2 => "potp2",
        }
    }

    pub fn class_names(self) -> Vec<String> {
        match self {
            Task::State3 => StateLabel::CLASSES.iter().map(|c| c.as_str().to_string()).collect(),
            Task::Potp2 => PotpLabel::CLASSES.iter().map(|c| c.as_str().to_string()).collect(),
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "state3" => Ok(Task::State3),
            "potp2" => Ok(Task::Potp2),
            other => Err(format!("unknown task {other:?} (expected state3 or potp2)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub algorithms: Vec<Algorithm>,
    pub tpe: TpeConfig,
    pub rest_as_neutral: bool,
    pub rfecv: bool,
    pub learning_fractions: Vec<f64>,
    pub thresholds: ThresholdOverride,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            tpe: TpeConfig::default(),
            rest_as_neutral: false,
            rfecv: true,
            learning_fractions: vec![0.25, 0.5, 0.75, 1.0],
            thresholds: ThresholdOverride::default(),
        }
    }
}

/// One row of the step-by-step optimization table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    pub algorithm: Algorithm,
    pub n_features: usize,
    pub cv_mean: Option<f64>,
    pub cv_std: Option<f64>,
    pub test_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub task: Task,
    pub seed: u64,
    pub plan: SplitPlan,
    pub scaler: ScalerStats,
    pub thresholds: Option<PotpThresholds>,
    pub selection: Selection,
    pub learning_curve: LearningCurve,
    pub tuning: Option<TpeResult>,
    pub elimination: Option<RfecvResult>,
    pub retuning: Option<TpeResult>,
    pub stages: Vec<StageReport>,
    pub artifact: ModelArtifact,
    pub test: EvalReport,
}

/// Rows whose label belongs to the task. Labels run parallel to the matrix rows.
pub fn build_dataset(matrix: &FeatureMatrix, labels: &LabeledDataset, task: Task) -> Result<Dataset, MlError> {
    if labels.labels.len() != matrix.n_rows() {
        return Err(MlError::LengthMismatch {
            left: matrix.n_rows(),
            right: labels.labels.len(),
        });
    }
    let classes = labels.labels.iter().map(|l| match task {
        Task::State3 => l.state.class_index(),
        Task::Potp2 => l.potp.class_index(),
    });
    dataset_from(matrix, classes, task)
}

/// Labeled rows of a task. The POTP task needs thresholds.
pub fn task_dataset(
    matrix: &FeatureMatrix,
    errors: &[TimeError],
    task: Task,
    thresholds: Option<&PotpThresholds>,
    rest_as_neutral: bool,
) -> Result<Dataset, MlError> {
    match task {
        Task::State3 => {
            let classes: Vec<Option<usize>> = matrix
                .rows()
                .iter()
                .map(|r| Ok(group_state_with(r.segment_index, rest_as_neutral)?.class_index()))
                .collect::<Result<_, MlError>>()?;
            dataset_from(matrix, classes.into_iter(), task)
        }
        Task::Potp2 => {
            let th = thresholds.ok_or(MlError::MissingThresholds)?;
            let labels = assign_labels(matrix, errors, *th, rest_as_neutral)?;
            build_dataset(matrix, &labels, task)
        }
    }
}

fn dataset_from(matrix: &FeatureMatrix, classes: impl Iterator<Item = Option<usize>>, task: Task) -> Result<Dataset, MlError> {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    let mut groups = Vec::new();
    for (r, c) in matrix.rows().iter().zip(classes) {
        if let Some(c) = c {
            rows.push(r.values.clone());
            y.push(c);
            groups.push(r.subject_id.clone());
        }
    }
    if rows.is_empty() {
        return Err(MlError::NoLabeledRows);
    }
    Dataset::new(Matrix::from_rows(&rows)?, y, groups, matrix.columns().to_vec(), task.class_names())
}

fn scaled(data: &Dataset, stats: &ScalerStats) -> Result<Dataset, MlError> {
    Ok(Dataset {
        x: apply_scaler(&data.x, &data.feature_names, stats)?,
        y: data.y.clone(),
        groups: data.groups.clone(),
        feature_names: stats.features.clone(),
        class_names: data.class_names.clone(),
    })
}

fn stage(name: &str, algorithm: Algorithm, n_features: usize, cv: Option<&CvScores>, cv_mean: Option<f64>) -> StageReport {
    StageReport {
        stage: name.to_string(),
        algorithm,
        n_features,
        cv_mean: cv.map(|c| c.mean).or(cv_mean),
        cv_std: cv.map(|c| c.std),
        test_score: None,
    }
}

/// Split subjects, label windows (POTP thresholds come from training
/// subjects only), scale on training rows, then select, tune, eliminate
/// features, retune, fit on all training subjects and score the held-out
/// subjects.
pub fn run_pipeline(
    matrix: &FeatureMatrix,
    errors: &[TimeError],
    task: Task,
    cfg: &PipelineConfig,
    seed: u64,
) -> Result<PipelineResult, MlError> {
    let mut subjects: Vec<String> = matrix.rows().iter().map(|r| r.subject_id.clone()).collect();
    subjects.sort();
    subjects.dedup();
    let plan = make_split_plan(&subjects, seed)?;

    let thresholds = match task {
        Task::State3 => None,
        Task::Potp2 => {
            let train_t_rel: Vec<f64> = errors
                .iter()
                .filter(|e| plan.train_subjects.contains(&e.subject_id))
                .map(|e| e.t_rel)
                .collect();
            Some(fit_potp_thresholds_with(&train_t_rel, cfg.thresholds)?)
        }
    };
    let data = task_dataset(matrix, errors, task, thresholds.as_ref(), cfg.rest_as_neutral)?;
    let train_rows = data.rows_of(&plan.train_subjects);
    let test_rows = data.rows_of(&plan.test_subjects);
    let train_raw = data.subset(&train_rows);
    let test_raw = data.subset(&test_rows);
    assert_disjoint(&train_raw.groups, &test_raw.groups)?;
    if train_raw.n_rows() == 0 {
        return Err(MlError::NoLabeledRows);
    }

    let scaler = fit_scaler(&train_raw.x, &train_raw.feature_names)?;
    let train = scaled(&train_raw, &scaler)?;
    let test = scaled(&test_raw, &scaler)?;
    info!("{task}: {} training rows, {} test rows, {} features", train.n_rows(), test.n_rows(), train.x.n_cols());

    let mut stages = Vec::new();
    let selection = select_model(&train, &plan, &cfg.algorithms, seed)?;
    let algorithm = selection.chosen;
    let chosen_cv = &selection
        .candidates
        .iter()
        .find(|c| c.algorithm == algorithm)
        .expect("chosen candidate")
        .cv;
    stages.push(stage("model selection", algorithm, train.x.n_cols(), Some(chosen_cv), None));
    info!("selected {algorithm} (mean CV {:.3})", chosen_cv.mean);
    let curve = learning_curve(
        algorithm,
        &algorithm.default_hyperparameters(),
        &train,
        &plan,
        &cfg.learning_fractions,
        seed,
    )?;

    let tunable = !algorithm.search_space().is_empty();
    let tune = |d: &Dataset, purpose: &str| -> Result<Option<TpeResult>, MlError> {
        if tunable {
            tpe_optimize(algorithm, d, &plan, &cfg.tpe, derive_seed(seed, purpose, 0)).map(Some)
        } else {
            Ok(None)
        }
    };
    let tuning = tune(&train, "tpe")?;
    let mut hp: Hyperparams = tuning.as_ref().map_or_else(|| algorithm.default_hyperparameters(), |t| t.best.clone());
    if let Some(t) = &tuning {
        stages.push(stage("hyperparameter optimization", algorithm, train.x.n_cols(), None, Some(t.best_score)));
    }

    let (elimination, selected) = if cfg.rfecv {
        let r = rfecv(algorithm, &hp, &train, &plan, seed)?;
        let step = r.steps.iter().find(|s| s.features == r.selected).expect("selected step");
        stages.push(stage("feature elimination", algorithm, r.selected.len(), Some(&step.cv), None));
        let sel = r.selected.clone();
        (Some(r), sel)
    } else {
        (None, train.feature_names.clone())
    };
    let cols: Vec<usize> = selected
        .iter()
        .map(|f| train.feature_names.iter().position(|n| n == f).expect("known feature"))
        .collect();
    let train_sel = train.with_features(&cols);
    let test_sel = test.with_features(&cols);

    let retuning = if cfg.rfecv { tune(&train_sel, "tpe-retune")? } else { None };
    if let Some(t) = &retuning {
        hp = t.best.clone();
        stages.push(stage("re-optimization", algorithm, selected.len(), None, Some(t.best_score)));
    }

    let final_cv = super::cv::cross_validate(algorithm, &hp, &train_sel, &plan, seed)?;
    let model = fit_model(algorithm, &hp, &train_sel.x, &train_sel.y, train_sel.n_classes(), derive_seed(seed, "final", 0))?;
    let predictions = model.predict(&test_sel.x);
    let mut report = evaluate(&test_sel.y, &predictions, &test_sel.class_names)?;
    report.cv = Some(final_cv.clone());
    let mut last = stage("test", algorithm, selected.len(), Some(&final_cv), None);
    last.test_score = Some(report.headline());
    stages.push(last);

    let artifact = ModelArtifact {
        version: ARTIFACT_VERSION,
        algorithm,
        hyperparameters: hp,
        model,
        scaler: Some(scaler.restrict(&selected)?),
        selected_features: selected,
        class_names: test_sel.class_names.clone(),
        seed,
        metrics: Some(report.clone()),
    };
    Ok(PipelineResult {
        task,
        seed,
        plan,
        scaler,
        thresholds,
        selection,
        learning_curve: curve,
        tuning,
        elimination,
        retuning,
        stages,
        artifact,
        test: report,
    })
}
