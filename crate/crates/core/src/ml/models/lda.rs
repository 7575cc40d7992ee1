//! Linear discriminant analysis with a shrunk pooled covariance.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ml::{softmax_in_place, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    /// `coef[k] = Σ⁻¹ μ_k`.
    pub coef: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
}

/// Covariance is `(1 - γ) Σ + γ · tr(Σ)/d · I`.
pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize, shrinkage: f64) -> LdaModel {
    let (n, d) = (x.n_rows(), x.n_cols());
    let mut means = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, row) in x.rows().enumerate() {
        counts[y[i]] += 1;
        for j in 0..d {
            means[y[i]][j] += row[j];
        }
    }
    for c in 0..k {
        if counts[c] > 0 {
            for v in means[c].iter_mut() {
                *v /= counts[c] as f64;
            }
        }
    }
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for (i, row) in x.rows().enumerate() {
        let r = DVector::from_iterator(d, row.iter().zip(&means[y[i]]).map(|(a, m)| a - m));
        cov += &r * r.transpose();
    }
    let present = counts.iter().filter(|&&c| c > 0).count();
    let dof = if n > present { n - present } else { n.max(1) };
    cov /= dof as f64;
    let avg_var = cov.trace() / d as f64;
    cov *= 1.0 - shrinkage;
    for j in 0..d {
        cov[(j, j)] += shrinkage * avg_var;
    }
    let inv = invert_spd(cov, avg_var);
    let mut coef = Vec::with_capacity(k);
    let mut intercept = Vec::with_capacity(k);
    for c in 0..k {
        let mu = DVector::from_vec(means[c].clone());
        let w = &inv * &mu;
        let prior = counts[c] as f64 / n as f64;
        intercept.push(-0.5 * mu.dot(&w) + prior.max(1e-300).ln());
        coef.push(w.iter().copied().collect());
    }
    LdaModel { coef, intercept }
}

fn invert_spd(cov: DMatrix<f64>, scale: f64) -> DMatrix<f64> {
    let d = cov.nrows();
    let mut ridge = 0.0;
    let base = if scale > 0.0 { scale } else { 1.0 };
    for _ in 0..12 {
        let mut m = cov.clone();
        for j in 0..d {
            m[(j, j)] += ridge;
        }
        if let Some(ch) = m.cholesky() {
            return ch.inverse();
        }
        ridge = if ridge == 0.0 { 1e-10 * base } else { ridge * 10.0 };
    }
    cov.pseudo_inverse(1e-12).unwrap_or_else(|_| DMatrix::identity(d, d))
}

impl LdaModel {
    pub fn discriminants(&self, row: &[f64]) -> Vec<f64> {
        self.coef
            .iter()
            .zip(&self.intercept)
            .map(|(w, b)| w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>() + b)
            .collect()
    }

    /// Posterior class probabilities.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.discriminants(row);
        softmax_in_place(&mut s);
        s
    }

    pub fn importance(&self) -> Vec<f64> {
        let d = self.coef.first().map_or(0, Vec::len);
        (0..d).map(|j| self.coef.iter().map(|w| w[j].abs()).sum()).collect()
    }
}
