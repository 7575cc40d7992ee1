//! Self-contained trained models and their JSON form.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::models::fit_model;
use super::{Algorithm, EvalReport, Hyperparams, Matrix, MlError, ScalerStats, TrainedModel};

pub const ARTIFACT_VERSION: u32 = 1;

/// Everything needed to score new rows. Input rows carry the
/// `selected_features` columns, unscaled; the stored scaler is applied first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub version: u32,
    pub algorithm: Algorithm,
    pub hyperparameters: Hyperparams,
    pub model: TrainedModel,
    pub scaler: Option<ScalerStats>,
    pub selected_features: Vec<String>,
    pub class_names: Vec<String>,
    pub seed: u64,
    pub metrics: Option<EvalReport>,
}

/// Fit on already-prepared rows. Classes are `0..=max(y)`, features are
/// named `f0, f1, ...` and no scaler is attached.
pub fn train(
    algorithm: Algorithm,
    hyperparameters: &Hyperparams,
    x: &Matrix,
    y: &[usize],
    seed: u64,
) -> Result<ModelArtifact, MlError> {
    let n_classes = y.iter().max().map_or(0, |m| m + 1).max(2);
    let model = fit_model(algorithm, hyperparameters, x, y, n_classes, seed)?;
    Ok(ModelArtifact {
        version: ARTIFACT_VERSION,
        algorithm,
        hyperparameters: hyperparameters.clone(),
        model,
        scaler: None,
        selected_features: (0..x.n_cols()).map(|j| format!("f{j}")).collect(),
        class_names: (0..n_classes).map(|c| c.to_string()).collect(),
        seed,
        metrics: None,
    })
}

impl ModelArtifact {
    /// Model-space row: scaled and imputed when a scaler is attached.
    pub fn prepare_row(&self, row: &[f64]) -> Vec<f64> {
        match &self.scaler {
            Some(s) => s.scale_row(row),
            None => row.to_vec(),
        }
    }

    fn check_width(&self, x: &Matrix) -> Result<(), MlError> {
        if x.n_rows() > 0 && x.n_cols() != self.selected_features.len() {
            return Err(MlError::DimensionMismatch {
                expected: self.selected_features.len(),
                got: x.n_cols(),
            });
        }
        Ok(())
    }

    pub fn scores(&self, x: &Matrix) -> Result<Vec<Vec<f64>>, MlError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.model.scores(&self.prepare_row(r))).collect())
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>, MlError> {
        self.check_width(x)?;
        Ok(x.rows().map(|r| self.model.predict_row(&self.prepare_row(r))).collect())
    }

    /// Pick `selected_features` out of a wider named table, then predict.
    pub fn predict_named(&self, names: &[String], x: &Matrix) -> Result<Vec<usize>, MlError> {
        self.predict(&x.select_cols(&self.columns_in(names)?))
    }

    pub fn columns_in(&self, names: &[String]) -> Result<Vec<usize>, MlError> {
        self.selected_features
            .iter()
            .map(|f| {
                names
                    .iter()
                    .position(|n| n == f)
                    .ok_or_else(|| MlError::UnknownFeature(f.clone()))
            })
            .collect()
    }
}

pub fn save_artifact(a: &ModelArtifact, path: impl AsRef<Path>) -> Result<(), MlError> {
    fs::write(path, serde_json::to_string_pretty(a)?)?;
    Ok(())
}

pub fn load_artifact(path: impl AsRef<Path>) -> Result<ModelArtifact, MlError> {
    let text = fs::read_to_string(path)?;
    let v: serde_json::Value = serde_json::from_str(&text)?;
    let found = v.get("version").and_then(serde_json::Value::as_u64).unwrap_or(0) as u32;
    if found != ARTIFACT_VERSION {
        return Err(MlError::ArtifactVersion {
            found,
            expected: ARTIFACT_VERSION,
        });
    }
    Ok(serde_json::from_value(v)?)
}
