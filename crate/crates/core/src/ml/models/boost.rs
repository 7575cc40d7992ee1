//! Second-order gradient boosted trees on logistic or softmax loss.

use serde::{Deserialize, Serialize};

use super::tree::{grow_levelwise, Presorted, SplitCriterion, Tree};
use crate::ml::{softmax_in_place, Matrix};

pub const MIN_CHILD_WEIGHT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostModel {
    pub n_classes: usize,
    pub eta: f64,
    /// `rounds × outputs`; one output for two classes, one per class otherwise.
    pub trees: Vec<Vec<Tree>>,
    /// Total split gain per feature, normalized to sum 1 when non-zero.
    pub importance: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BoostParams {
    pub eta: f64,
    pub rounds: usize,
    pub max_depth: usize,
    pub lambda: f64,
}

fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    -g / (h + lambda)
}

/// Newton gain on gradient and hessian sums.
struct Newton<'a> {
    g: &'a [f64],
    h: &'a [f64],
    lambda: f64,
}

#[derive(Debug, Clone)]
struct GradSums {
    g: f64,
    h: f64,
    n: usize,
}

impl SplitCriterion for Newton<'_> {
    type Stats = GradSums;

    fn empty(&self) -> GradSums {
        GradSums { g: 0.0, h: 0.0, n: 0 }
    }

    fn add(&self, s: &mut GradSums, row: usize) {
        s.g += self.g[row];
        s.h += self.h[row];
        s.n += 1;
    }

    fn gain(&self, p: &GradSums, l: &GradSums) -> f64 {
        let score = |g: f64, h: f64| g * g / (h + self.lambda);
        0.5 * (score(l.g, l.h) + score(p.g - l.g, p.h - l.h) - score(p.g, p.h))
    }

    fn can_split(&self, s: &GradSums) -> bool {
        s.n >= 2
    }

    fn child_ok(&self, p: &GradSums, l: &GradSums) -> bool {
        l.h >= MIN_CHILD_WEIGHT && p.h - l.h >= MIN_CHILD_WEIGHT
    }

    fn leaf_value(&self, s: &GradSums) -> Vec<f64> {
        vec![leaf_weight(s.g, s.h, self.lambda)]
    }

    fn credit(&self, _: &GradSums, gain: f64) -> f64 {
        gain
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

pub(crate) fn fit(x: &Matrix, y: &[usize], k: usize, p: BoostParams) -> BoostModel {
    let n = x.n_rows();
    let outputs = if k == 2 { 1 } else { k };
    let mut margin = vec![vec![0.0; outputs]; n];
    let mut importance = vec![0.0; x.n_cols()];
    let mut trees = Vec::with_capacity(p.rounds);
    let sorted = Presorted::new(x);
    let weight = vec![1u32; n];
    for _ in 0..p.rounds {
        let probs: Vec<Vec<f64>> = margin
            .iter()
            .map(|m| {
                if outputs == 1 {
                    vec![sigmoid(m[0])]
                } else {
                    let mut v = m.clone();
                    softmax_in_place(&mut v);
                    v
                }
            })
            .collect();
        let mut round = Vec::with_capacity(outputs);
        for o in 0..outputs {
            let target = |i: usize| f64::from(u8::from(if outputs == 1 { y[i] == 1 } else { y[i] == o }));
            let g: Vec<f64> = (0..n).map(|i| probs[i][o] - target(i)).collect();
            let h: Vec<f64> = (0..n).map(|i| (probs[i][o] * (1.0 - probs[i][o])).max(1e-16)).collect();
            let crit = Newton { g: &g, h: &h, lambda: p.lambda };
            round.push(grow_levelwise(x, &sorted, &weight, &crit, p.max_depth, None, None, &mut importance));
        }
        for (i, m) in margin.iter_mut().enumerate() {
            for (o, t) in round.iter().enumerate() {
                m[o] += p.eta * t.leaf(x.row(i))[0];
            }
        }
        trees.push(round);
    }
    let s: f64 = importance.iter().sum();
    if s > 0.0 {
        importance.iter_mut().for_each(|v| *v /= s);
    }
    BoostModel {
        n_classes: k,
        eta: p.eta,
        trees,
        importance,
    }
}

impl BoostModel {
    pub fn margins(&self, row: &[f64]) -> Vec<f64> {
        let outputs = if self.n_classes == 2 { 1 } else { self.n_classes };
        let mut m = vec![0.0; outputs];
        for round in &self.trees {
            for (o, t) in round.iter().enumerate() {
                m[o] += self.eta * t.leaf(row)[0];
            }
        }
        m
    }

    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut m = self.margins(row);
        if self.n_classes == 2 {
            let p = sigmoid(m[0]);
            vec![1.0 - p, p]
        } else {
            softmax_in_place(&mut m);
            m
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_leaf_weights_are_newton_steps() {
        // one round, depth 1: leaves hold -G/(H+λ) with p = 1/2
        let x = Matrix::from_rows(&(0..8).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<usize> = (0..8).map(|i| usize::from(i >= 4)).collect();
        let m = fit(
            &x,
            &y,
            2,
            BoostParams {
                eta: 1.0,
                rounds: 1,
                max_depth: 1,
                lambda: 1.0,
            },
        );
        let t = &m.trees[0][0];
        assert_eq!(t.nodes[0].threshold, 3.5);
        let want = 2.0 / (1.0 + 1.0);
        assert!((t.leaf(&[7.0])[0] - want).abs() < 1e-12);
        assert!((t.leaf(&[0.0])[0] + want).abs() < 1e-12);
    }
}
