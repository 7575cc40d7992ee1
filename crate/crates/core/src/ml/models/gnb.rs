//! Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use crate::ml::{softmax_in_place, Matrix};

pub const VAR_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnbModel {
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
    pub log_priors: Vec<f64>,
}

pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize) -> GnbModel {
    let d = x.n_cols();
    let mut means = vec![vec![0.0; d]; k];
    let mut vars = vec![vec![0.0; d]; k];
    let mut counts = vec![0.0; k];
    for (i, row) in x.rows().enumerate() {
        counts[y[i]] += 1.0;
        for j in 0..d {
            means[y[i]][j] += row[j];
        }
    }
    for c in 0..k {
        for v in means[c].iter_mut() {
            *v /= f64::max(counts[c], 1.0);
        }
    }
    for (i, row) in x.rows().enumerate() {
        for j in 0..d {
            let r = row[j] - means[y[i]][j];
            vars[y[i]][j] += r * r;
        }
    }
    for c in 0..k {
        for v in vars[c].iter_mut() {
            *v = (*v / f64::max(counts[c], 1.0)).max(VAR_FLOOR);
        }
    }
    let n = x.n_rows() as f64;
    let log_priors = counts.iter().map(|c| if *c > 0.0 { (c / n).ln() } else { f64::MIN_POSITIVE.ln() }).collect();
    GnbModel { means, vars, log_priors }
}

impl GnbModel {
    pub fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        (0..self.means.len())
            .map(|c| {
                self.log_priors[c]
                    + row
                        .iter()
                        .zip(&self.means[c])
                        .zip(&self.vars[c])
                        .map(|((x, m), v)| -0.5 * ((2.0 * std::f64::consts::PI * v).ln() + (x - m) * (x - m) / v))
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut s = self.log_joint(row);
        softmax_in_place(&mut s);
        s
    }
}
