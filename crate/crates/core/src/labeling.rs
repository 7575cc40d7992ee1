//! Relative time-estimation error, state grouping, group tests, POTP
//! thresholds and window labels.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{FeatureMatrix, Session};
use crate::stats::{mean, one_tailed_t_test, population_std, StatsError, Tail};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabelError {
    #[error("correct duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("perceived duration must be non-negative, got {0}")]
    NegativePerceived(f64),
    #[error("unknown segment index {0}")]
    UnknownSegment(u8),
    #[error("class {class} has {n} observations; at least 2 are needed")]
    ClassTooSmall { class: &'static str, n: usize },
    #[error("class {class}: {source}")]
    Test {
        class: &'static str,
        #[source]
        source: StatsError,
    },
    #[error("need at least 3 negative and 3 positive t_rel values, got {neg} and {pos}")]
    InsufficientSides { neg: usize, pos: usize },
    #[error("thresholds cross: lower {lower} is not below upper {upper}")]
    CrossedThresholds { lower: f64, upper: f64 },
    #[error("no time error for subject {subject_id} segment {segment_index}")]
    MissingTimeError { subject_id: String, segment_index: u8 },
    #[error("time error file: {0}")]
    File(String),
}

/// Percentage error of a duration estimate; positive means time felt faster.
pub fn compute_t_rel(t_correct_s: f64, t_perceived_s: f64) -> Result<f64, LabelError> {
    if !(t_correct_s > 0.0) {
        return Err(LabelError::NonPositiveDuration(t_correct_s));
    }
    if !(t_perceived_s >= 0.0) {
        return Err(LabelError::NegativePerceived(t_perceived_s));
    }
    Ok(100.0 * (t_correct_s - t_perceived_s) / t_correct_s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeError {
    pub subject_id: String,
    pub segment_index: u8,
    pub t_rel: f64,
}

/// Writes time errors as `subject_id,segment_index,t_rel`.
pub fn save_time_errors(errors: &[TimeError], path: impl AsRef<std::path::Path>) -> Result<(), LabelError> {
    let file_err = |e: csv::Error| LabelError::File(e.to_string());
    let mut w = csv::Writer::from_path(path).map_err(file_err)?;
    for e in errors {
        w.serialize(e).map_err(file_err)?;
    }
    w.flush().map_err(|e| LabelError::File(e.to_string()))
}

pub fn load_time_errors(path: impl AsRef<std::path::Path>) -> Result<Vec<TimeError>, LabelError> {
    let file_err = |e: csv::Error| LabelError::File(e.to_string());
    let mut r = csv::Reader::from_path(path).map_err(file_err)?;
    let errors: Vec<TimeError> = r.deserialize().collect::<Result<_, _>>().map_err(file_err)?;
    if let Some(e) = errors.iter().find(|e| !e.t_rel.is_finite()) {
        return Err(LabelError::File(format!(
            "non-finite t_rel for {} segment {}",
            e.subject_id, e.segment_index
        )));
    }
    Ok(errors)
}

/// Time errors of every segment that has a questionnaire answer.
pub fn session_time_errors(session: &Session) -> Result<Vec<TimeError>, LabelError> {
    session
        .segments
        .iter()
        .filter_map(|s| s.t_perceived_s.map(|p| (s, p)))
        .map(|(s, p)| {
            Ok(TimeError {
                subject_id: session.subject_id.clone(),
                segment_index: s.index,
                t_rel: compute_t_rel(s.t_correct(), p)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StateLabel {
    Emotional,
    Neutral,
    Cognitive,
    Excluded,
}

impl StateLabel {
    pub const CLASSES: [StateLabel; 3] = [StateLabel::Emotional, StateLabel::Neutral, StateLabel::Cognitive];

    pub fn as_str(self) -> &'static str {
        match self {
            StateLabel::Emotional => "Emotional",
            StateLabel::Neutral => "Neutral",
            StateLabel::Cognitive => "Cognitive",
            StateLabel::Excluded => "Excluded",
        }
    }

    /// Class index in the three-class task.
    pub fn class_index(self) -> Option<usize> {
        Self::CLASSES.iter().position(|c| *c == self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PotpLabel {
    Faster,
    Slower,
    Unlabeled,
}

impl PotpLabel {
    pub const CLASSES: [PotpLabel; 2] = [PotpLabel::Slower, PotpLabel::Faster];

    pub fn as_str(self) -> &'static str {
        match self {
            PotpLabel::Faster => "Faster",
            PotpLabel::Slower => "Slower",
            PotpLabel::Unlabeled => "Unlabeled",
        }
    }

    /// +1, -1 or 0.
    pub fn sign(self) -> i8 {
        match self {
            PotpLabel::Faster => 1,
            PotpLabel::Slower => -1,
            PotpLabel::Unlabeled => 0,
        }
    }

    /// Class index in the binary task; Faster is the positive class.
    pub fn class_index(self) -> Option<usize> {
        Self::CLASSES.iter().position(|c| *c == self)
    }
}

/// State class of a protocol segment. With `rest_as_neutral`, rest
/// segments 6 and 9 join the Neutral group.
pub fn group_state_with(index: u8, rest_as_neutral: bool) -> Result<StateLabel, LabelError> {
    Ok(match index {
        2 | 3 => StateLabel::Neutral,
        4 | 8 => StateLabel::Emotional,
        5 | 7 => StateLabel::Cognitive,
        6 | 9 if rest_as_neutral => StateLabel::Neutral,
        1 | 6 | 9 => StateLabel::Excluded,
        other => return Err(LabelError::UnknownSegment(other)),
    })
}

pub fn group_state(index: u8) -> Result<StateLabel, LabelError> {
    group_state_with(index, false)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Slower,
    #[serde(rename = "No change")]
    NoChange,
    Faster,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Slower => "Slower",
            Direction::NoChange => "No change",
            Direction::Faster => "Faster",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTest {
    pub class: StateLabel,
    pub n: usize,
    pub mean_t_rel: f64,
    pub tail: Tail,
    pub t_stat: f64,
    pub p_value: f64,
    pub direction: Direction,
}

pub const ALPHA: f64 = 0.05;

/// Hypothesized direction per class: Emotional and Neutral towards slower
/// (mean below zero), Cognitive towards faster.
pub fn hypothesis_tail(class: StateLabel) -> Tail {
    match class {
        StateLabel::Cognitive => Tail::Greater,
        _ => Tail::Less,
    }
}

/// One-sample one-tailed t-test of t_rel per state class.
pub fn run_group_tests(errors: &[TimeError], rest_as_neutral: bool) -> Result<Vec<GroupTest>, LabelError> {
    let mut groups: HashMap<StateLabel, Vec<f64>> = HashMap::new();
    for e in errors {
        let state = group_state_with(e.segment_index, rest_as_neutral)?;
        groups.entry(state).or_default().push(e.t_rel);
    }
    StateLabel::CLASSES
        .iter()
        .map(|&class| {
            let x = groups.get(&class).map(Vec::as_slice).unwrap_or(&[]);
            if x.len() < 2 {
                return Err(LabelError::ClassTooSmall {
                    class: class.as_str(),
                    n: x.len(),
                });
            }
            let tail = hypothesis_tail(class);
            let t = one_tailed_t_test(x, tail).map_err(|source| LabelError::Test {
                class: class.as_str(),
                source,
            })?;
            let direction = match (t.p_value < ALPHA, tail) {
                (false, _) => Direction::NoChange,
                (true, Tail::Less) => Direction::Slower,
                (true, Tail::Greater) => Direction::Faster,
            };
            Ok(GroupTest {
                class,
                n: x.len(),
                mean_t_rel: t.mean,
                tail,
                t_stat: t.t_stat,
                p_value: t.p_value,
                direction,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mu_pos: f64,
    pub sigma_pos: f64,
    pub mu_neg: f64,
    pub sigma_neg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PotpThresholds {
    pub upper: f64,
    pub lower: f64,
    pub fit: GaussianFit,
}

impl PotpThresholds {
    /// Strictly above `upper` is Faster, strictly below `lower` is Slower.
    pub fn label(&self, t_rel: f64) -> PotpLabel {
        if t_rel > self.upper {
            PotpLabel::Faster
        } else if t_rel < self.lower {
            PotpLabel::Slower
        } else {
            PotpLabel::Unlabeled
        }
    }
}

/// Moment fit of a Gaussian to the negative and to the positive t_rel
/// values. Zeros belong to neither side.
pub fn fit_sign_gaussians(t_rel: &[f64]) -> Result<GaussianFit, LabelError> {
    let neg: Vec<f64> = t_rel.iter().copied().filter(|v| *v < 0.0).collect();
    let pos: Vec<f64> = t_rel.iter().copied().filter(|v| *v > 0.0).collect();
    if neg.len() < 3 || pos.len() < 3 {
        return Err(LabelError::InsufficientSides {
            neg: neg.len(),
            pos: pos.len(),
        });
    }
    Ok(GaussianFit {
        mu_pos: mean(&pos),
        sigma_pos: population_std(&pos),
        mu_neg: mean(&neg),
        sigma_neg: population_std(&neg),
    })
}

/// Fixed threshold values that replace the fitted ones.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdOverride {
    pub upper: Option<f64>,
    pub lower: Option<f64>,
}

/// The upper threshold lies two standard deviations right of the negative
/// mean, the lower two standard deviations left of the positive mean.
pub fn fit_potp_thresholds(t_rel: &[f64]) -> Result<PotpThresholds, LabelError> {
    fit_potp_thresholds_with(t_rel, ThresholdOverride::default())
}

pub fn fit_potp_thresholds_with(t_rel: &[f64], over: ThresholdOverride) -> Result<PotpThresholds, LabelError> {
    let fit = fit_sign_gaussians(t_rel)?;
    let upper = over.upper.unwrap_or(fit.mu_neg + 2.0 * fit.sigma_neg);
    let lower = over.lower.unwrap_or(fit.mu_pos - 2.0 * fit.sigma_pos);
    if !(lower < upper) {
        return Err(LabelError::CrossedThresholds { lower, upper });
    }
    Ok(PotpThresholds { upper, lower, fit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowLabel {
    pub subject_id: String,
    pub segment_index: u8,
    pub window_index: u32,
    pub t_rel: f64,
    pub state: StateLabel,
    pub potp: PotpLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    /// Parallel to the feature matrix rows.
    pub labels: Vec<WindowLabel>,
    pub thresholds: PotpThresholds,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelCounts {
    pub faster: usize,
    pub slower: usize,
    pub unlabeled: usize,
    pub emotional: usize,
    pub neutral: usize,
    pub cognitive: usize,
    pub excluded: usize,
}

impl LabeledDataset {
    pub fn counts(&self) -> LabelCounts {
        let mut c = LabelCounts::default();
        for l in &self.labels {
            match l.potp {
                PotpLabel::Faster => c.faster += 1,
                PotpLabel::Slower => c.slower += 1,
                PotpLabel::Unlabeled => c.unlabeled += 1,
            }
            match l.state {
                StateLabel::Emotional => c.emotional += 1,
                StateLabel::Neutral => c.neutral += 1,
                StateLabel::Cognitive => c.cognitive += 1,
                StateLabel::Excluded => c.excluded += 1,
            }
        }
        c
    }
}

/// Every window inherits its segment's t_rel, state and POTP label.
pub fn assign_labels(
    matrix: &FeatureMatrix,
    errors: &[TimeError],
    thresholds: PotpThresholds,
    rest_as_neutral: bool,
) -> Result<LabeledDataset, LabelError> {
    let lookup: HashMap<(&str, u8), f64> = errors
        .iter()
        .map(|e| ((e.subject_id.as_str(), e.segment_index), e.t_rel))
        .collect();
    let labels = matrix
        .rows()
        .iter()
        .map(|r| {
            let t_rel = *lookup
                .get(&(r.subject_id.as_str(), r.segment_index))
                .ok_or_else(|| LabelError::MissingTimeError {
                    subject_id: r.subject_id.clone(),
                    segment_index: r.segment_index,
                })?;
            Ok(WindowLabel {
                subject_id: r.subject_id.clone(),
                segment_index: r.segment_index,
                window_index: r.window_index,
                t_rel,
                state: group_state_with(r.segment_index, rest_as_neutral)?,
                potp: thresholds.label(t_rel),
            })
        })
        .collect::<Result<_, _>>()?;
    Ok(LabeledDataset { labels, thresholds })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_center: f64,
    pub count: usize,
    pub fitted_pos_pdf: f64,
    pub fitted_neg_pdf: f64,
}

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return 0.0;
    }
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Histogram of t_rel with both fitted Gaussians scaled to expected counts.
pub fn t_rel_histogram(t_rel: &[f64], fit: &GaussianFit, bin_width: f64) -> Vec<HistogramBin> {
    if t_rel.is_empty() || !(bin_width > 0.0) {
        return Vec::new();
    }
    let lo = (t_rel.iter().cloned().fold(f64::INFINITY, f64::min) / bin_width).floor() * bin_width;
    let hi = t_rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n_bins = (((hi - lo) / bin_width).floor() as usize) + 1;
    let mut counts = vec![0usize; n_bins];
    for v in t_rel {
        let k = (((v - lo) / bin_width).floor() as usize).min(n_bins - 1);
        counts[k] += 1;
    }
    let n_pos = t_rel.iter().filter(|v| **v > 0.0).count() as f64;
    let n_neg = t_rel.iter().filter(|v| **v < 0.0).count() as f64;
    counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| {
            let c = lo + (k as f64 + 0.5) * bin_width;
            HistogramBin {
                bin_center: c,
                count,
                fitted_pos_pdf: n_pos * bin_width * normal_pdf(c, fit.mu_pos, fit.sigma_pos),
                fitted_neg_pdf: n_neg * bin_width * normal_pdf(c, fit.mu_neg, fit.sigma_neg),
            }
        })
        .collect()
}
