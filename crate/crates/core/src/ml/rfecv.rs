//! Recursive feature elimination scored by cross-validation.

use serde::{Deserialize, Serialize};

use super::cv::{cross_validate, CvScores};
use super::models::fit_model;
use super::{Algorithm, Dataset, Hyperparams, MlError, SplitPlan};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvStep {
    pub features: Vec<String>,
    pub cv: CvScores,
    /// Feature removed after scoring this subset.
    pub dropped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfecvResult {
    pub selected: Vec<String>,
    pub score: f64,
    /// One entry per subset size, largest first.
    pub steps: Vec<RfecvStep>,
}

/// Importance used for elimination: the family's own measure, or a default
/// random forest surrogate for KNN, GNB and SVM.
pub fn feature_importance(algorithm: Algorithm, hp: &Hyperparams, data: &Dataset, seed: u64) -> Result<Vec<f64>, MlError> {
    let model = fit_model(algorithm, hp, &data.x, &data.y, data.n_classes(), seed)?;
    match model.native_importance() {
        Some(v) => Ok(v),
        None => {
            let rf = fit_model(
                Algorithm::RF,
                &Algorithm::RF.default_hyperparameters(),
                &data.x,
                &data.y,
                data.n_classes(),
                derive_seed(seed, "rfecv-surrogate", 0),
            )?;
            Ok(rf.native_importance().expect("forest importance"))
        }
    }
}

/// Drop the least important feature one at a time down to a single one and
/// keep the subset with the best mean CV score; ties go to fewer features.
pub fn rfecv(algorithm: Algorithm, hp: &Hyperparams, data: &Dataset, plan: &SplitPlan, seed: u64) -> Result<RfecvResult, MlError> {
    if data.x.n_cols() == 0 {
        return Err(MlError::Empty);
    }
    let mut current: Vec<usize> = (0..data.x.n_cols()).collect();
    let mut steps = Vec::with_capacity(current.len());
    let mut step = 0u64;
    loop {
        let sub = data.with_features(&current);
        let cv = cross_validate(algorithm, hp, &sub, plan, seed)?;
        let features = sub.feature_names.clone();
        if current.len() == 1 {
            steps.push(RfecvStep { features, cv, dropped: None });
            break;
        }
        let imp = feature_importance(algorithm, hp, &sub, derive_seed(seed, "rfecv", step))?;
        let mut worst = 0;
        for (j, v) in imp.iter().enumerate() {
            if *v < imp[worst] {
                worst = j;
            }
        }
        steps.push(RfecvStep {
            features,
            cv,
            dropped: Some(sub.feature_names[worst].clone()),
        });
        current.remove(worst);
        step += 1;
    }
    let mut best = 0;
    for (i, s) in steps.iter().enumerate() {
        if s.cv.mean >= steps[best].cv.mean {
            best = i;
        }
    }
    Ok(RfecvResult {
        selected: steps[best].features.clone(),
        score: steps[best].cv.mean,
        steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::{make_split_plan, Matrix};
    use crate::rng::stream;
    use rand::Rng;

    fn planted(seed: u64) -> Dataset {
        let mut rng = stream(seed, "rfecv-data", 0);
        let (mut rows, mut y, mut groups) = (Vec::new(), Vec::new(), Vec::new());
        for s in 0..10 {
            for _ in 0..24 {
                let r: Vec<f64> = (0..13).map(|_| rng.random_range(-1.0..1.0)).collect();
                y.push(usize::from(r[0] + 0.8 * r[1] - 0.9 * r[2] > 0.0));
                rows.push(r);
                groups.push(format!("S{s:02}"));
            }
        }
        let names = (0..13).map(|j| if j < 3 { format!("info{j}") } else { format!("noise{j}") }).collect();
        Dataset::new(Matrix::from_rows(&rows).unwrap(), y, groups, names, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn keeps_informative_drops_noise() {
        let d = planted(1);
        let plan = make_split_plan(&d.subjects(), 2).unwrap();
        let train = d.subset(&d.rows_of(&plan.train_subjects));
        let r = rfecv(Algorithm::LogReg, &Algorithm::LogReg.default_hyperparameters(), &train, &plan, 2).unwrap();
        for f in ["info0", "info1", "info2"] {
            assert!(r.selected.iter().any(|s| s == f), "{:?}", r.selected);
        }
        let noise = r.selected.iter().filter(|s| s.starts_with("noise")).count();
        assert!(noise <= 3, "{:?}", r.selected);
        assert_eq!(r.steps.len(), 13);
    }

    #[test]
    fn single_feature() {
        let d = planted(3).with_features(&[0]);
        let plan = make_split_plan(&d.subjects(), 0).unwrap();
        let r = rfecv(Algorithm::GNB, &Hyperparams::new(), &d, &plan, 0).unwrap();
        assert_eq!(r.selected, vec!["info0".to_string()]);
        assert_eq!(r.steps.len(), 1);
    }

    #[test]
    fn surrogate_for_models_without_importance() {
        let d = planted(4);
        let imp = feature_importance(Algorithm::KNN, &Algorithm::KNN.default_hyperparameters(), &d, 0).unwrap();
        assert_eq!(imp.len(), 13);
        let top: f64 = imp[..3].iter().sum();
        assert!(top > 0.5, "{imp:?}");
    }
}
