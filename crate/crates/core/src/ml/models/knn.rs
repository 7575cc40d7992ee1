//! k nearest neighbours.

use serde::{Deserialize, Serialize};

use crate::ml::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub k: usize,
    pub n_classes: usize,
    pub x: Matrix,
    pub y: Vec<usize>,
}

impl KnnModel {
    /// Vote fractions among the k nearest training rows (Euclidean; equal
    /// distances keep training order).
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        let mut d: Vec<(f64, usize)> = self
            .x
            .rows()
            .enumerate()
            .map(|(i, r)| (r.iter().zip(row).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
            .collect();
        let k = self.k.min(d.len()).max(1);
        d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0.0; self.n_classes];
        for &(_, i) in &d[..k] {
            votes[self.y[i]] += 1.0;
        }
        votes.iter().map(|v| v / k as f64).collect()
    }
}
