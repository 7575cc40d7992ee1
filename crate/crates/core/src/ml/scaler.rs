//! Training-set standardization with NaN handling.

use log::warn;
use serde::{Deserialize, Serialize};

use super::{Matrix, MlError};

/// Columns with more missing values than this fraction are dropped.
pub const MAX_NAN_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DropReason {
    TooManyNan,
    ZeroVariance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerStats {
    /// Retained features, in output order.
    pub features: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    /// Replacement for missing values, the training mean.
    pub impute: Vec<f64>,
    pub dropped: Vec<(String, DropReason)>,
}

impl ScalerStats {
    /// Scale one row whose values follow `self.features`.
    pub fn scale_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .enumerate()
            .map(|(j, &v)| {
                let v = if v.is_nan() { self.impute[j] } else { v };
                (v - self.mean[j]) / self.std[j]
            })
            .collect()
    }

    /// Keep only `names`, in that order.
    pub fn restrict(&self, names: &[String]) -> Result<ScalerStats, MlError> {
        let mut out = ScalerStats {
            features: Vec::new(),
            mean: Vec::new(),
            std: Vec::new(),
            impute: Vec::new(),
            dropped: self.dropped.clone(),
        };
        for n in names {
            let j = self
                .features
                .iter()
                .position(|f| f == n)
                .ok_or_else(|| MlError::UnknownFeature(n.clone()))?;
            out.features.push(n.clone());
            out.mean.push(self.mean[j]);
            out.std.push(self.std[j]);
            out.impute.push(self.impute[j]);
        }
        Ok(out)
    }
}

/// Drop sparse and constant columns, impute the training mean and use the
/// population standard deviation.
pub fn fit_scaler(x: &Matrix, names: &[String]) -> Result<ScalerStats, MlError> {
    if names.len() != x.n_cols() {
        return Err(MlError::DimensionMismatch {
            expected: x.n_cols(),
            got: names.len(),
        });
    }
    if x.n_rows() == 0 {
        return Err(MlError::Empty);
    }
    let n = x.n_rows() as f64;
    let mut stats = ScalerStats {
        features: Vec::new(),
        mean: Vec::new(),
        std: Vec::new(),
        impute: Vec::new(),
        dropped: Vec::new(),
    };
    for (j, name) in names.iter().enumerate() {
        let col = x.column(j);
        let present: Vec<f64> = col.iter().copied().filter(|v| v.is_finite()).collect();
        let missing = col.len() - present.len();
        if missing as f64 > MAX_NAN_FRACTION * n || present.is_empty() {
            stats.dropped.push((name.clone(), DropReason::TooManyNan));
            continue;
        }
        let m = present.iter().sum::<f64>() / present.len() as f64;
        // imputed entries sit at the mean and add nothing to the spread
        let var = present.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
        let sd = var.sqrt();
        if !(sd > 1e-12 * m.abs().max(1e-300)) {
            warn!("dropping zero-variance feature {name}");
            stats.dropped.push((name.clone(), DropReason::ZeroVariance));
            continue;
        }
        stats.features.push(name.clone());
        stats.mean.push(m);
        stats.std.push(sd);
        stats.impute.push(m);
    }
    Ok(stats)
}

/// Select, impute and z-score the columns named in `stats`.
pub fn apply_scaler(x: &Matrix, names: &[String], stats: &ScalerStats) -> Result<Matrix, MlError> {
    let cols: Vec<usize> = stats
        .features
        .iter()
        .map(|f| {
            names
                .iter()
                .position(|n| n == f)
                .ok_or_else(|| MlError::UnknownFeature(f.clone()))
        })
        .collect::<Result<_, _>>()?;
    let picked = x.select_cols(&cols);
    let mut out = Matrix::zeros(x.n_rows(), cols.len());
    for i in 0..x.n_rows() {
        out.row_mut(i).copy_from_slice(&stats.scale_row(picked.row(i)));
    }
    Ok(out)
}
