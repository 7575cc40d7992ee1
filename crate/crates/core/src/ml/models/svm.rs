//! RBF support vector machines trained by SMO, one-vs-rest for more than two classes.

use serde::{Deserialize, Serialize};

use crate::ml::Matrix;

pub const TOLERANCE: f64 = 1e-3;
const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub support: Vec<Vec<f64>>,
    /// `α_i y_i` for each support vector.
    pub coef: Vec<f64>,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub n_classes: usize,
    /// One machine for class 1 in the binary case, one per class otherwise.
    pub machines: Vec<BinarySvm>,
}

fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    (-gamma * a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>()).exp()
}

/// Solve the C-SVC dual with second-order working-set selection.
/// Returns `(alpha, rho)`; the decision function is `Σ α_i y_i K(x_i, x) − ρ`.
pub(crate) fn smo(kernel: &[f64], y: &[f64], c: f64, tol: f64) -> (Vec<f64>, f64) {
    let n = y.len();
    let q = |i: usize, j: usize| y[i] * y[j] * kernel[i * n + j];
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let max_iter = 10_000 * n.max(1);
    let up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);
    for _ in 0..max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], y[t]) && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
        }
        if i == usize::MAX {
            break;
        }
        let mut gmin = f64::INFINITY;
        let mut j = usize::MAX;
        let mut best_obj = f64::INFINITY;
        for t in 0..n {
            if !low(alpha[t], y[t]) {
                continue;
            }
            let v = -y[t] * grad[t];
            gmin = gmin.min(v);
            let b = gmax - v;
            if b > 0.0 {
                let a = (kernel[i * n + i] + kernel[t * n + t] - 2.0 * kernel[i * n + t]).max(TAU);
                let obj = -(b * b) / a;
                if obj < best_obj {
                    best_obj = obj;
                    j = t;
                }
            }
        }
        if gmax - gmin < tol || j == usize::MAX {
            break;
        }
        let (ai, aj) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (q(i, i) + q(j, j) + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (q(i, i) + q(j, j) - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai, alpha[j] - aj);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    // offset: average over free vectors, else the middle of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            sum_free += yg;
            n_free += 1;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    (alpha, rho)
}

pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize, c: f64, gamma: f64) -> SvmModel {
    let n = x.n_rows();
    let mut kernel = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(x.row(i), x.row(j), gamma);
            kernel[i * n + j] = v;
            kernel[j * n + i] = v;
        }
    }
    let targets: Vec<usize> = if k == 2 { vec![1] } else { (0..k).collect() };
    let machines = targets
        .into_iter()
        .map(|cls| {
            let yy: Vec<f64> = y.iter().map(|&v| if v == cls { 1.0 } else { -1.0 }).collect();
            let (alpha, rho) = smo(&kernel, &yy, c, TOLERANCE);
            let mut m = BinarySvm {
                support: Vec::new(),
                coef: Vec::new(),
                rho,
            };
            for i in 0..n {
                if alpha[i] > 0.0 {
                    m.support.push(x.row(i).to_vec());
                    m.coef.push(alpha[i] * yy[i]);
                }
            }
            m
        })
        .collect();
    SvmModel {
        gamma,
        n_classes: k,
        machines,
    }
}

impl BinarySvm {
    pub fn decision(&self, row: &[f64], gamma: f64) -> f64 {
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(s, a)| a * rbf(s, row, gamma))
            .sum::<f64>()
            - self.rho
    }
}

impl SvmModel {
    /// Decision values per class (not probabilities).
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        if self.n_classes == 2 {
            let f = self.machines[0].decision(row, self.gamma);
            vec![-f, f]
        } else {
            self.machines.iter().map(|m| m.decision(row, self.gamma)).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_constraints_hold() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![(i as f64 * 0.37).sin() * 2.0, (i as f64) / 10.0]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows.iter().map(|r| if r[0] + 0.3 * r[1] > 0.2 { 1.0 } else { -1.0 }).collect();
        let n = rows.len();
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                k[i * n + j] = rbf(x.row(i), x.row(j), 0.5);
            }
        }
        let (alpha, _) = smo(&k, &y, 2.0, TOLERANCE);
        assert!(alpha.iter().all(|a| (0.0..=2.0).contains(a)));
        let s: f64 = alpha.iter().zip(&y).map(|(a, b)| a * b).sum();
        assert!(s.abs() < 1e-9);
    }

    #[test]
    fn separates_two_points() {
        let x = Matrix::from_rows(&[vec![-1.0], vec![1.0]]).unwrap();
        let m = fit(&x, &[0, 1], 2, 10.0, 1.0);
        assert!(m.scores(&[-1.0])[0] > 0.0);
        assert!(m.scores(&[1.0])[1] > 0.0);
        // symmetric problem: boundary at zero
        assert!(m.machines[0].decision(&[0.0], 1.0).abs() < 1e-9);
    }
}
