//! Files written by one step must reproduce the in-memory results of the next.

use potp_core::data::{load_feature_matrix, load_session, save_feature_matrix, save_session};
use potp_core::features::build_feature_matrix;
use potp_core::labeling::session_time_errors;
use potp_core::ml::{load_artifact, run_pipeline, save_artifact, task_dataset, Algorithm, PipelineConfig, Task, TpeConfig};
use potp_core::synth::generate_cohort;
use potp_core::{FeatureMatrix, Scenario};

fn same_bits(a: &FeatureMatrix, b: &FeatureMatrix) -> bool {
    a.columns() == b.columns()
        && a.n_rows() == b.n_rows()
        && a.rows().iter().zip(b.rows()).all(|(r, s)| {
            r.subject_id == s.subject_id
                && r.segment_index == s.segment_index
                && r.values.iter().zip(&s.values).all(|(x, y)| x.to_bits() == y.to_bits() || x.is_nan() && y.is_nan())
        })
}

#[test]
fn stored_sessions_give_identical_features() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = generate_cohort(3, Scenario::PaperLike, 11).unwrap();
    let sessions: Vec<_> = cohort.into_iter().map(|(s, _)| s).collect();
    let reloaded: Vec<_> = sessions
        .iter()
        .map(|s| load_session(save_session(s, dir.path().join(&s.subject_id)).unwrap()).unwrap())
        .collect();
    for (a, b) in sessions.iter().zip(&reloaded) {
        assert_eq!(session_time_errors(a).unwrap(), session_time_errors(b).unwrap());
    }
    let direct = build_feature_matrix(&sessions, 45.0).unwrap();
    let via_disk = build_feature_matrix(&reloaded, 45.0).unwrap();
    assert!(same_bits(&direct, &via_disk));

    let path = dir.path().join("features.csv");
    save_feature_matrix(&direct, &path).unwrap();
    assert!(same_bits(&direct, &load_feature_matrix(&path).unwrap()));
}

#[test]
fn saved_model_scores_like_the_pipeline() {
    let cohort = generate_cohort(6, Scenario::PaperLike, 5).unwrap();
    let sessions: Vec<_> = cohort.into_iter().map(|(s, _)| s).collect();
    let matrix = build_feature_matrix(&sessions, 45.0).unwrap();
    let errors: Vec<_> = sessions.iter().flat_map(|s| session_time_errors(s).unwrap()).collect();
    let cfg = PipelineConfig {
        algorithms: vec![Algorithm::LDA, Algorithm::GNB],
        tpe: TpeConfig {
            budget: 4,
            n_startup: 4,
            ..TpeConfig::default()
        },
        rfecv: false,
        ..PipelineConfig::default()
    };
    let result = run_pipeline(&matrix, &errors, Task::State3, &cfg, 3).unwrap();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    save_artifact(&result.artifact, &path).unwrap();
    let artifact = load_artifact(&path).unwrap();
    assert_eq!(artifact, result.artifact);

    let data = task_dataset(&matrix, &errors, Task::State3, None, false).unwrap();
    let test = data.subset(&data.rows_of(&result.plan.test_subjects));
    let pred = artifact.predict_named(&test.feature_names, &test.x).unwrap();
    let report = potp_core::ml::evaluate(&test.y, &pred, &test.class_names).unwrap();
    assert_eq!(report.confusion, result.test.confusion);
    assert_eq!(report.weighted_f1.to_bits(), result.test.weighted_f1.to_bits());
}
