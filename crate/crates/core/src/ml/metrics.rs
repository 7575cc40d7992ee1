//! Classification metrics.

use serde::{Deserialize, Serialize};

use super::{CvScores, MlError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_class: Vec<ClassMetrics>,
    pub weighted_f1: f64,
    pub accuracy: f64,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
    pub cv: Option<CvScores>,
}

impl EvalReport {
    /// The score optimized by model search: F-1 of the positive class for
    /// binary tasks, support-weighted F-1 otherwise.
    pub fn headline(&self) -> f64 {
        if self.per_class.len() == 2 {
            self.per_class[1].f1
        } else {
            self.weighted_f1
        }
    }
}

/// Undefined ratios (no predictions or no support) count as 0.
pub fn evaluate(y_true: &[usize], y_pred: &[usize], class_names: &[String]) -> Result<EvalReport, MlError> {
    if y_true.len() != y_pred.len() {
        return Err(MlError::LengthMismatch {
            left: y_true.len(),
            right: y_pred.len(),
        });
    }
    let k = class_names.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        if t >= k {
            return Err(MlError::InvalidLabel(t));
        }
        if p >= k {
            return Err(MlError::InvalidLabel(p));
        }
        confusion[t][p] += 1;
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = confusion[c][c];
            let support: usize = confusion[c].iter().sum();
            let predicted: usize = confusion.iter().map(|r| r[c]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                class: class_names[c].clone(),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let total: usize = per_class.iter().map(|m| m.support).sum();
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        per_class.iter().map(|m| m.support as f64 * m.f1).sum::<f64>() / total as f64
    };
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        per_class,
        weighted_f1,
        accuracy: ratio(correct, total),
        confusion,
        cv: None,
    })
}

/// Headline score for `n_classes`, see [`EvalReport::headline`].
pub fn score(y_true: &[usize], y_pred: &[usize], n_classes: usize) -> Result<f64, MlError> {
    let names: Vec<String> = (0..n_classes).map(|c| c.to_string()).collect();
    Ok(evaluate(y_true, y_pred, &names)?.headline())
}
