//! L2-regularized multinomial logistic regression.

use serde::{Deserialize, Serialize};

use crate::ml::{softmax_in_place, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub n_classes: usize,
    pub n_features: usize,
    /// Row-major `n_classes × (n_features + 1)`, bias last.
    pub weights: Vec<f64>,
}

pub const MAX_ITER: usize = 500;
const GRAD_TOL: f64 = 1e-6;

fn class_probs(w: &[f64], row: &[f64], k: usize) -> Vec<f64> {
    let d = row.len();
    let mut z: Vec<f64> = (0..k)
        .map(|c| {
            let wc = &w[c * (d + 1)..(c + 1) * (d + 1)];
            wc[..d].iter().zip(row).map(|(a, b)| a * b).sum::<f64>() + wc[d]
        })
        .collect();
    softmax_in_place(&mut z);
    z
}

/// Mean cross-entropy plus `lambda/2 ||W||²` (bias excluded), and its gradient.
pub fn logreg_objective(w: &[f64], x: &Matrix, y: &[usize], k: usize, lambda: f64) -> (f64, Vec<f64>) {
    let d = x.n_cols();
    let n = x.n_rows() as f64;
    let mut loss = 0.0;
    let mut grad = vec![0.0; w.len()];
    for (i, row) in x.rows().enumerate() {
        let p = class_probs(w, row, k);
        loss -= p[y[i]].max(1e-300).ln();
        for c in 0..k {
            let r = p[c] - f64::from(u8::from(c == y[i]));
            let g = &mut grad[c * (d + 1)..(c + 1) * (d + 1)];
            for j in 0..d {
                g[j] += r * row[j];
            }
            g[d] += r;
        }
    }
    loss /= n;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for c in 0..k {
        for j in 0..d {
            let v = w[c * (d + 1) + j];
            loss += 0.5 * lambda * v * v;
            grad[c * (d + 1) + j] += lambda * v;
        }
    }
    (loss, grad)
}

/// Full-batch gradient descent with Armijo backtracking.
pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize, lambda: f64) -> LogRegModel {
    let d = x.n_cols();
    let mut w = vec![0.0; k * (d + 1)];
    let mut step = 1.0;
    let (mut f, mut g) = logreg_objective(&w, x, y, k, lambda);
    for _ in 0..MAX_ITER {
        let gn2: f64 = g.iter().map(|v| v * v).sum();
        if gn2.sqrt() < GRAD_TOL {
            break;
        }
        let accepted = loop {
            let cand: Vec<f64> = w.iter().zip(&g).map(|(a, b)| a - step * b).collect();
            let (fc, gc) = logreg_objective(&cand, x, y, k, lambda);
            if fc <= f - 0.5 * step * gn2 {
                break Some((cand, fc, gc));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        match accepted {
            Some((cand, fc, gc)) => {
                w = cand;
                f = fc;
                g = gc;
                step *= 2.0;
            }
            None => break,
        }
    }
    LogRegModel {
        n_classes: k,
        n_features: d,
        weights: w,
    }
}

impl LogRegModel {
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        class_probs(&self.weights, row, self.n_classes)
    }

    /// Sum over classes of |weight| per feature.
    pub fn importance(&self) -> Vec<f64> {
        let d = self.n_features;
        (0..d)
            .map(|j| (0..self.n_classes).map(|c| self.weights[c * (d + 1) + j].abs()).sum())
            .collect()
    }
}
