//! Sampling-based Shapley attributions and feature ranking.

use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ml::{Matrix, ModelArtifact};
use crate::rng::stream;

pub const DEFAULT_SAMPLES: usize = 2000;
pub const DEFAULT_BACKGROUND: usize = 100;

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("n_samples must be at least 1")]
    NoSamples,
    #[error("background set is empty")]
    EmptyBackground,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `phi[row][feature][class]` with matching Monte Carlo standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribution {
    pub features: Vec<String>,
    pub classes: Vec<String>,
    pub phi: Vec<Vec<Vec<f64>>>,
    pub se: Vec<Vec<Vec<f64>>>,
    /// Standard error of `Σ_j phi[row][j][class]`.
    pub sum_se: Vec<Vec<f64>>,
    /// Score of each explained row, per class.
    pub prediction: Vec<Vec<f64>>,
    /// Mean score over the background set, per class.
    pub baseline: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
}

/// Draw up to `n` distinct rows.
pub fn sample_background(x: &Matrix, n: usize, seed: u64) -> Matrix {
    let mut idx: Vec<usize> = (0..x.n_rows()).collect();
    idx.shuffle(&mut stream(seed, "shap-background", 0));
    idx.truncate(n);
    idx.sort_unstable();
    x.select_rows(&idx)
}

/// Permutation estimator for any score function. Each sample takes a random
/// feature order and a background row and adds the row's features one at a
/// time; feature j is credited with the score change when it enters.
/// Background rows are cycled in reshuffled blocks.
pub fn shapley_with<F>(
    score: F,
    rows: &Matrix,
    background: &Matrix,
    n_samples: usize,
    seed: u64,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>), ExplainError>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    if n_samples == 0 {
        return Err(ExplainError::NoSamples);
    }
    if background.n_rows() == 0 {
        return Err(ExplainError::EmptyBackground);
    }
    let d = background.n_cols();
    if rows.n_rows() > 0 && rows.n_cols() != d {
        return Err(ExplainError::DimensionMismatch {
            expected: d,
            got: rows.n_cols(),
        });
    }
    let bg_scores: Vec<Vec<f64>> = background.rows().map(&score).collect();
    let k = bg_scores[0].len();
    let baseline: Vec<f64> = (0..k)
        .map(|c| bg_scores.iter().map(|s| s[c]).sum::<f64>() / bg_scores.len() as f64)
        .collect();
    let per_row: Vec<_> = (0..rows.n_rows())
        .into_par_iter()
        .map(|r| {
            let x = rows.row(r);
            let mut rng = stream(seed, "shap-row", r as u64);
            let mut order: Vec<usize> = (0..d).collect();
            let mut block: Vec<usize> = Vec::new();
            let mut sum = vec![vec![0.0; k]; d];
            let mut sum_sq = vec![vec![0.0; k]; d];
            let mut tot = vec![0.0; k];
            let mut tot_sq = vec![0.0; k];
            let fx = score(x);
            for _ in 0..n_samples {
                if block.is_empty() {
                    block = (0..background.n_rows()).collect();
                    block.shuffle(&mut rng);
                }
                let z = block.pop().expect("non-empty block");
                order.shuffle(&mut rng);
                let mut cur = background.row(z).to_vec();
                let mut prev = bg_scores[z].clone();
                for &j in &order {
                    cur[j] = x[j];
                    let next = score(&cur);
                    for c in 0..k {
                        let m = next[c] - prev[c];
                        sum[j][c] += m;
                        sum_sq[j][c] += m * m;
                    }
                    prev = next;
                }
                for c in 0..k {
                    let t = fx[c] - bg_scores[z][c];
                    tot[c] += t;
                    tot_sq[c] += t * t;
                }
            }
            let n = n_samples as f64;
            let se_of = |s: f64, sq: f64| {
                if n_samples < 2 {
                    0.0
                } else {
                    let m = s / n;
                    ((sq / n - m * m).max(0.0) * n / (n - 1.0) / n).sqrt()
                }
            };
            let phi: Vec<Vec<f64>> = sum.iter().map(|v| v.iter().map(|s| s / n).collect()).collect();
            let se: Vec<Vec<f64>> = sum.iter().zip(&sum_sq).map(|(s, q)| s.iter().zip(q).map(|(a, b)| se_of(*a, *b)).collect()).collect();
            let sum_se: Vec<f64> = tot.iter().zip(&tot_sq).map(|(a, b)| se_of(*a, *b)).collect();
            (phi, se, sum_se, fx)
        })
        .collect();
    let mut phi = Vec::with_capacity(per_row.len());
    let mut se = Vec::with_capacity(per_row.len());
    let mut sum_se = Vec::with_capacity(per_row.len());
    let mut prediction = Vec::with_capacity(per_row.len());
    for (p, s, t, f) in per_row {
        phi.push(p);
        se.push(s);
        sum_se.push(t);
        prediction.push(f);
    }
    Ok((phi, se, sum_se, prediction, baseline))
}

/// Attributions of the artifact's class scores. Rows and background carry
/// the artifact's selected features, unscaled.
pub fn shapley_attributions(
    artifact: &ModelArtifact,
    rows: &Matrix,
    background: &Matrix,
    n_samples: usize,
    seed: u64,
) -> Result<Attribution, ExplainError> {
    let d = artifact.selected_features.len();
    if background.n_rows() > 0 && background.n_cols() != d {
        return Err(ExplainError::DimensionMismatch {
            expected: d,
            got: background.n_cols(),
        });
    }
    let score = |r: &[f64]| artifact.model.scores(&artifact.prepare_row(r));
    let (phi, se, sum_se, prediction, baseline) = shapley_with(score, rows, background, n_samples, seed)?;
    Ok(Attribution {
        features: artifact.selected_features.clone(),
        classes: artifact.class_names.clone(),
        phi,
        se,
        sum_se,
        prediction,
        baseline,
        n_samples,
        seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRank {
    pub feature: String,
    /// Mean |phi| over rows, per class.
    pub per_class: Vec<f64>,
    pub total: f64,
}

/// Descending by summed mean |phi|; equal totals keep input order.
pub fn rank_features(attr: &Attribution) -> Vec<FeatureRank> {
    let n = attr.phi.len().max(1) as f64;
    let mut ranks: Vec<FeatureRank> = attr
        .features
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let per_class: Vec<f64> = (0..attr.classes.len())
                .map(|c| attr.phi.iter().map(|row| row[j][c].abs()).sum::<f64>() / n)
                .collect();
            FeatureRank {
                feature: f.clone(),
                total: per_class.iter().sum(),
                per_class,
            }
        })
        .collect();
    ranks.sort_by(|a, b| b.total.total_cmp(&a.total));
    ranks
}

pub fn write_attributions_csv(attr: &Attribution, path: impl AsRef<Path>) -> Result<(), ExplainError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["row_id", "feature", "class", "phi"])?;
    for (r, row) in attr.phi.iter().enumerate() {
        for (j, vals) in row.iter().enumerate() {
            for (c, v) in vals.iter().enumerate() {
                w.write_record([r.to_string(), attr.features[j].clone(), attr.classes[c].clone(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per feature with a mean |phi| column per class, ready for a stacked bar plot.
pub fn write_ranking_csv(ranks: &[FeatureRank], classes: &[String], path: impl AsRef<Path>) -> Result<(), ExplainError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["rank".to_string(), "feature".to_string()];
    header.extend(classes.iter().cloned());
    header.push("total".to_string());
    w.write_record(&header)?;
    for (i, r) in ranks.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), r.feature.clone()];
        rec.extend(r.per_class.iter().map(f64::to_string));
        rec.push(r.total.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
