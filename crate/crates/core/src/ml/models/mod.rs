//! The eight classifier families.

mod boost;
mod forest;
mod gnb;
mod knn;
mod lda;
mod logreg;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};

pub use boost::BoostModel;
pub use forest::ForestModel;
pub use gnb::{GnbModel, VAR_FLOOR};
pub use knn::KnnModel;
pub use lda::LdaModel;
pub use logreg::{logreg_objective, LogRegModel};
pub use svm::{BinarySvm, SvmModel};
pub use tree::{Tree, TreeNode};

use super::{argmax, hp_get, Algorithm, Hyperparams, Matrix, MlError};

/// Fitted parameters of one family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TrainedModel {
    LogReg(LogRegModel),
    Tree(ForestModel),
    Knn(KnnModel),
    Lda(LdaModel),
    Gnb(GnbModel),
    Svm(SvmModel),
    Forest(ForestModel),
    Boost(BoostModel),
}

fn int_param(hp: &Hyperparams, a: Algorithm, name: &str, min: i64) -> Result<usize, MlError> {
    let v = hp_get(hp, a, name);
    if !(v.is_finite() && v.round() >= min as f64) {
        return Err(MlError::InvalidHyperparameter {
            name: name.to_string(),
            value: v,
        });
    }
    Ok(v.round() as usize)
}

fn real_param(hp: &Hyperparams, a: Algorithm, name: &str, ok: impl Fn(f64) -> bool) -> Result<f64, MlError> {
    let v = hp_get(hp, a, name);
    if !(v.is_finite() && ok(v)) {
        return Err(MlError::InvalidHyperparameter {
            name: name.to_string(),
            value: v,
        });
    }
    Ok(v)
}

/// Fit one family. Missing hyperparameters take the family defaults.
pub fn fit_model(
    algorithm: Algorithm,
    hp: &Hyperparams,
    x: &Matrix,
    y: &[usize],
    n_classes: usize,
    seed: u64,
) -> Result<TrainedModel, MlError> {
    if x.n_rows() != y.len() {
        return Err(MlError::LengthMismatch {
            left: x.n_rows(),
            right: y.len(),
        });
    }
    if x.n_rows() == 0 || x.n_cols() == 0 {
        return Err(MlError::Empty);
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(MlError::InvalidLabel(bad));
    }
    if y.iter().all(|&c| c == y[0]) {
        return Err(MlError::SingleClass);
    }
    if x.rows().flatten().any(|v| !v.is_finite()) {
        return Err(MlError::NonFinite);
    }
    let a = algorithm;
    Ok(match algorithm {
        Algorithm::LogReg => {
            let lambda = real_param(hp, a, "lambda", |v| v >= 0.0)?;
            TrainedModel::LogReg(logreg::fit(x, y, n_classes, lambda))
        }
        Algorithm::DTC => {
            let depth = int_param(hp, a, "max_depth", 1)?;
            let min_leaf = int_param(hp, a, "min_leaf", 1)?;
            TrainedModel::Tree(forest::fit_tree(x, y, n_classes, depth, min_leaf))
        }
        Algorithm::KNN => {
            let k = int_param(hp, a, "k", 1)?;
            TrainedModel::Knn(KnnModel {
                k,
                n_classes,
                x: x.clone(),
                y: y.to_vec(),
            })
        }
        Algorithm::LDA => {
            let g = real_param(hp, a, "shrinkage", |v| (0.0..=1.0).contains(&v))?;
            TrainedModel::Lda(lda::fit(x, y, n_classes, g))
        }
        Algorithm::GNB => TrainedModel::Gnb(gnb::fit(x, y, n_classes)),
        Algorithm::SVM => {
            let c = real_param(hp, a, "C", |v| v > 0.0)?;
            let gamma = real_param(hp, a, "gamma", |v| v > 0.0)?;
            TrainedModel::Svm(svm::fit(x, y, n_classes, c, gamma))
        }
        Algorithm::RF => {
            let n_trees = int_param(hp, a, "n_trees", 1)?;
            let depth = int_param(hp, a, "max_depth", 1)?;
            TrainedModel::Forest(forest::fit_forest(x, y, n_classes, n_trees, depth, seed))
        }
        Algorithm::XGB => {
            let params = boost::BoostParams {
                eta: real_param(hp, a, "eta", |v| v > 0.0)?,
                rounds: int_param(hp, a, "rounds", 1)?,
                max_depth: int_param(hp, a, "max_depth", 1)?,
                lambda: real_param(hp, a, "lambda", |v| v >= 0.0)?,
            };
            TrainedModel::Boost(boost::fit(x, y, n_classes, params))
        }
    })
}

impl TrainedModel {
    /// One real value per class; probabilities except for SVM decision values.
    pub fn scores(&self, row: &[f64]) -> Vec<f64> {
        match self {
            TrainedModel::LogReg(m) => m.scores(row),
            TrainedModel::Tree(m) | TrainedModel::Forest(m) => m.scores(row),
            TrainedModel::Knn(m) => m.scores(row),
            TrainedModel::Lda(m) => m.scores(row),
            TrainedModel::Gnb(m) => m.scores(row),
            TrainedModel::Svm(m) => m.scores(row),
            TrainedModel::Boost(m) => m.scores(row),
        }
    }

    pub fn is_probabilistic(&self) -> bool {
        !matches!(self, TrainedModel::Svm(_))
    }

    pub fn predict_row(&self, row: &[f64]) -> usize {
        argmax(&self.scores(row))
    }

    pub fn predict(&self, x: &Matrix) -> Vec<usize> {
        x.rows().map(|r| self.predict_row(r)).collect()
    }

    /// Built-in importance: impurity decrease, split gain or |weight|.
    /// `None` for families without one.
    pub fn native_importance(&self) -> Option<Vec<f64>> {
        match self {
            TrainedModel::Tree(m) | TrainedModel::Forest(m) => Some(m.importance.clone()),
            TrainedModel::Boost(m) => Some(m.importance.clone()),
            TrainedModel::LogReg(m) => Some(m.importance()),
            TrainedModel::Lda(m) => Some(m.importance()),
            TrainedModel::Knn(_) | TrainedModel::Gnb(_) | TrainedModel::Svm(_) => None,
        }
    }
}
