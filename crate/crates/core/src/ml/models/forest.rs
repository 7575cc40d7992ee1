//! Single CART classifiers and bagged random forests.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_classifier, CartParams, Presorted, Tree};
use crate::ml::Matrix;
use crate::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub n_classes: usize,
    pub trees: Vec<Tree>,
    /// Mean impurity decrease per feature, normalized to sum 1 when non-zero.
    pub importance: Vec<f64>,
}

fn normalize(v: &mut [f64]) {
    let s: f64 = v.iter().sum();
    if s > 0.0 {
        for x in v.iter_mut() {
            *x /= s;
        }
    }
}

pub(crate) fn fit_tree(x: &Matrix, y: &[usize], k: usize, max_depth: usize, min_leaf: usize) -> ForestModel {
    let mut importance = vec![0.0; x.n_cols()];
    let params = CartParams {
        max_depth,
        min_leaf,
        max_features: None,
    };
    let sorted = Presorted::new(x);
    let tree = grow_classifier(x, &sorted, y, k, &vec![1; x.n_rows()], params, None, &mut importance);
    normalize(&mut importance);
    ForestModel {
        n_classes: k,
        trees: vec![tree],
        importance,
    }
}

/// Bootstrap rows and `floor(√d)` candidate features per split; tree `t`
/// draws from its own stream so the forest is independent of thread count.
pub(crate) fn fit_forest(x: &Matrix, y: &[usize], k: usize, n_trees: usize, max_depth: usize, seed: u64) -> ForestModel {
    let (n, d) = (x.n_rows(), x.n_cols());
    let m = ((d as f64).sqrt().floor() as usize).max(1);
    let sorted = Presorted::new(x);
    let grown: Vec<(Tree, Vec<f64>)> = (0..n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = stream(seed, "rf-tree", t as u64);
            let mut weight = vec![0u32; n];
            for _ in 0..n {
                weight[rng.random_range(0..n)] += 1;
            }
            let mut imp = vec![0.0; d];
            let params = CartParams {
                max_depth,
                min_leaf: 1,
                max_features: Some(m),
            };
            let tree = grow_classifier(x, &sorted, y, k, &weight, params, Some(&mut rng), &mut imp);
            (tree, imp)
        })
        .collect();
    let mut importance = vec![0.0; d];
    let mut trees = Vec::with_capacity(n_trees);
    for (tree, imp) in grown {
        for (a, b) in importance.iter_mut().zip(&imp) {
            *a += b / n_trees as f64;
        }
        trees.push(tree);
    }
    normalize(&mut importance);
    ForestModel {
        n_classes: k,
        trees,
        importance,
    }
}

impl ForestModel {
    /// Mean leaf class distribution.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (a, b) in p.iter_mut().zip(t.leaf(row)) {
                *a += b;
            }
        }
        let nt = self.trees.len() as f64;
        p.iter().map(|v| v / nt).collect()
    }
}
