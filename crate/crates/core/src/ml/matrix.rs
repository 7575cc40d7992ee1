//! Dense row-major matrix and the labeled dataset the models train on.

use serde::{Deserialize, Serialize};

use super::MlError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, data: Vec<f64>) -> Result<Self, MlError> {
        if data.len() != n_rows * n_cols {
            return Err(MlError::DimensionMismatch {
                expected: n_rows * n_cols,
                got: data.len(),
            });
        }
        Ok(Self { n_rows, n_cols, data })
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            data: vec![0.0; n_rows * n_cols],
        }
    }

    /// Rows must share one width; an empty slice gives a 0×0 matrix.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, MlError> {
        let n_cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * n_cols);
        for r in rows {
            if r.len() != n_cols {
                return Err(MlError::DimensionMismatch {
                    expected: n_cols,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            n_rows: rows.len(),
            n_cols,
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n_cols + j] = v;
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.get(i, j)).collect()
    }

    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            n_rows: idx.len(),
            n_cols: self.n_cols,
            data,
        }
    }

    pub fn select_cols(&self, cols: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(self.n_rows * cols.len());
        for r in self.rows() {
            data.extend(cols.iter().map(|&j| r[j]));
        }
        Matrix {
            n_rows: self.n_rows,
            n_cols: cols.len(),
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }
}

/// Feature rows with class labels and the subject each row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub groups: Vec<String>,
    pub feature_names: Vec<String>,
    pub class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<usize>,
        groups: Vec<String>,
        feature_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self, MlError> {
        if y.len() != x.n_rows() || groups.len() != x.n_rows() {
            return Err(MlError::LengthMismatch {
                left: x.n_rows(),
                right: if y.len() != x.n_rows() { y.len() } else { groups.len() },
            });
        }
        if feature_names.len() != x.n_cols() {
            return Err(MlError::DimensionMismatch {
                expected: x.n_cols(),
                got: feature_names.len(),
            });
        }
        if let Some(&bad) = y.iter().find(|&&c| c >= class_names.len()) {
            return Err(MlError::InvalidLabel(bad));
        }
        Ok(Self {
            x,
            y,
            groups,
            feature_names,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            class_names: self.class_names.clone(),
        }
    }

    pub fn with_features(&self, cols: &[usize]) -> Dataset {
        Dataset {
            x: self.x.select_cols(cols),
            y: self.y.clone(),
            groups: self.groups.clone(),
            feature_names: cols.iter().map(|&j| self.feature_names[j].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }

    /// Indices of rows belonging to any of `subjects`.
    pub fn rows_of(&self, subjects: &[String]) -> Vec<usize> {
        let set: std::collections::HashSet<&str> = subjects.iter().map(String::as_str).collect();
        (0..self.n_rows()).filter(|&i| set.contains(self.groups[i].as_str())).collect()
    }

    /// Sorted distinct subject ids.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.groups.clone();
        s.sort();
        s.dedup();
        s
    }
}
