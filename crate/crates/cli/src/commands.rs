//! One function per subcommand. Each reads its inputs from the run
//! directory, writes its outputs there and records itself in the manifest.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use log::{info, warn};
use potp_core::data::{load_feature_matrix, load_session, save_feature_matrix, FeatureMatrix, Manifest, Session};
use potp_core::explain::{rank_features, sample_background, shapley_attributions, write_attributions_csv, write_ranking_csv};
use potp_core::features::{build_feature_matrix, registry};
use potp_core::labeling::{
    assign_labels, fit_potp_thresholds_with, fit_sign_gaussians, load_time_errors, run_group_tests, save_time_errors, session_time_errors,
    t_rel_histogram, LabelCounts, PotpThresholds, TimeError,
};
use potp_core::ml::{
    evaluate, load_artifact, make_split_plan, run_pipeline, save_artifact, task_dataset, Dataset, EvalReport, Matrix,
    PipelineConfig, PipelineResult, SplitPlan, Task,
};
use potp_core::rng::derive_seed;
use potp_core::stats::Tail;
use potp_core::synth::generate_cohort;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::run::{manifests_under, task_file, RunDir};
use crate::CliError;

pub const HISTOGRAM_BIN_WIDTH: f64 = 10.0;

/// What `label` stores next to the labels.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelRecord {
    pub thresholds: PotpThresholds,
    pub train_subjects: Vec<String>,
    pub counts: LabelCounts,
}

/// What `train` stores: the configuration it ran with and everything the
/// pipeline produced.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainRecord {
    pub config: PipelineConfig,
    pub result: PipelineResult,
}

/// The parts of a train record later steps read.
#[derive(Debug, Clone, Deserialize)]
struct TrainSummary {
    config: PipelineConfig,
    result: ResultSummary,
}

#[derive(Debug, Clone, Deserialize)]
struct ResultSummary {
    plan: SplitPlan,
    thresholds: Option<PotpThresholds>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

fn load_sessions(run: &RunDir) -> Result<Vec<Session>, CliError> {
    run.session_manifests()?
        .iter()
        .map(|m| load_session(m).map_err(CliError::from))
        .collect()
}

fn time_errors_of(sessions: &[Session]) -> Result<Vec<TimeError>, CliError> {
    let mut out = Vec::new();
    for s in sessions {
        out.extend(session_time_errors(s)?);
    }
    Ok(out)
}

fn subjects_of(matrix: &FeatureMatrix) -> Vec<String> {
    let mut s: Vec<String> = matrix.rows().iter().map(|r| r.subject_id.clone()).collect();
    s.sort();
    s.dedup();
    s
}

fn tail_str(t: Tail) -> &'static str {
    match t {
        Tail::Greater => "greater",
        Tail::Less => "less",
    }
}

pub fn synth(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    info!("generating {} {} subjects with seed {seed}", cfg.subjects, cfg.scenario.as_str());
    let cohort = generate_cohort(cfg.subjects, cfg.scenario, seed)?;
    let mut outputs = Vec::new();
    fs::create_dir_all(run.path("truth"))?;
    let sessions: Vec<Session> = cohort.iter().map(|(s, _)| s.clone()).collect();
    for (session, truth) in &cohort {
        let dir = run.sessions_dir().join(&session.subject_id);
        potp_core::data::save_session(session, &dir)?;
        let truth_rel = format!("truth/{}.json", session.subject_id);
        write_json(&run.path(&truth_rel), truth)?;
        outputs.push(format!("sessions/{}", session.subject_id));
        outputs.push(truth_rel);
    }
    save_time_errors(&time_errors_of(&sessions)?, run.path("time_errors.csv"))?;
    outputs.push("time_errors.csv".into());
    run.record("synth", cfg, Some(seed), outputs)
}

pub fn ingest(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let src = cfg
        .sessions_dir
        .as_deref()
        .ok_or_else(|| CliError::Usage("ingest needs --sessions DIR".into()))?;
    if !src.is_dir() {
        return Err(CliError::data(format!("{} is not a directory", src.display())));
    }
    let manifests = manifests_under(src)?;
    if manifests.is_empty() {
        return Err(CliError::data(format!("no manifest.json under {}", src.display())));
    }
    let mut sessions = Vec::new();
    let mut seen = HashSet::new();
    for m in &manifests {
        let s = load_session(m)?;
        if !seen.insert(s.subject_id.clone()) {
            return Err(CliError::data(format!("subject {} appears twice", s.subject_id)));
        }
        sessions.push(s);
    }
    sessions.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    let mut outputs = Vec::new();
    for s in &sessions {
        potp_core::data::save_session(s, run.sessions_dir().join(&s.subject_id))?;
        outputs.push(format!("sessions/{}", s.subject_id));
    }
    save_time_errors(&time_errors_of(&sessions)?, run.path("time_errors.csv"))?;
    outputs.push("time_errors.csv".into());
    info!("ingested {} sessions", sessions.len());
    run.record("ingest", cfg, None, outputs)
}

pub fn list_features() -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(std::io::stdout());
    w.write_record(["name", "group", "units", "symbol"])?;
    for f in registry() {
        w.write_record([f.name.as_str(), f.group.as_str(), f.units, f.symbol.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Drop the columns of disabled feature groups.
fn without_groups(matrix: FeatureMatrix, cfg: &RunConfig) -> Result<FeatureMatrix, CliError> {
    let disabled = cfg.disabled()?;
    if disabled.is_empty() {
        return Ok(matrix);
    }
    let keep: Vec<usize> = matrix
        .columns()
        .iter()
        .enumerate()
        .filter(|(_, c)| {
            !registry()
                .iter()
                .any(|f| &f.name == *c && disabled.contains(&f.group))
        })
        .map(|(i, _)| i)
        .collect();
    let mut out = FeatureMatrix::new(keep.iter().map(|&i| matrix.columns()[i].clone()).collect())?;
    out.extend(matrix.rows().iter().map(|r| {
        let mut row = r.clone();
        row.values = keep.iter().map(|&i| r.values[i]).collect();
        row
    }))?;
    Ok(out)
}

pub fn features(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let sessions = load_sessions(run)?;
    info!("extracting {} s windows from {} sessions", cfg.window_len_s, sessions.len());
    let matrix = without_groups(build_feature_matrix(&sessions, cfg.window_len_s)?, cfg)?;
    save_feature_matrix(&matrix, run.path("features.csv"))?;
    info!("{} windows x {} features", matrix.n_rows(), matrix.columns().len());
    run.record("features", cfg, None, vec!["features.csv".into()])
}

fn load_inputs(run: &RunDir) -> Result<(FeatureMatrix, Vec<TimeError>), CliError> {
    let matrix = load_feature_matrix(run.input("features.csv", "features")?)?;
    let errors = load_time_errors(run.input("time_errors.csv", "synth` or `potp ingest")?)?;
    Ok((matrix, errors))
}

pub fn label(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let (matrix, errors) = load_inputs(run)?;
    let plan = make_split_plan(&subjects_of(&matrix), seed)?;
    let train_t_rel: Vec<f64> = errors
        .iter()
        .filter(|e| plan.train_subjects.contains(&e.subject_id))
        .map(|e| e.t_rel)
        .collect();
    let thresholds = fit_potp_thresholds_with(&train_t_rel, cfg.thresholds)?;
    info!("thresholds: lower {:.2}, upper {:.2}", thresholds.lower, thresholds.upper);
    let labeled = assign_labels(&matrix, &errors, thresholds, cfg.rest_as_neutral)?;

    let mut w = csv::Writer::from_path(run.path("labels.csv"))?;
    w.write_record(["subject_id", "segment_index", "window_index", "t_rel", "state", "potp"])?;
    for l in &labeled.labels {
        w.write_record([
            l.subject_id.clone(),
            l.segment_index.to_string(),
            l.window_index.to_string(),
            l.t_rel.to_string(),
            l.state.as_str().to_string(),
            l.potp.as_str().to_string(),
        ])?;
    }
    w.flush()?;

    let record = LabelRecord {
        thresholds,
        train_subjects: plan.train_subjects.clone(),
        counts: labeled.counts(),
    };
    write_json(&run.path("thresholds.json"), &record)?;

    run.record("label", cfg, Some(seed), vec!["labels.csv".into(), "thresholds.json".into()])
}

/// Histogram of the t_rel values the thresholds were fit on. Without a
/// `label` step every subject's values are used and no thresholds are drawn.
fn write_histogram(run: &RunDir, errors: &[TimeError]) -> Result<(), CliError> {
    let record_path = run.path("thresholds.json");
    let (values, fit, bounds) = if record_path.exists() {
        let record: LabelRecord = read_json(&record_path)?;
        let values: Vec<f64> = errors
            .iter()
            .filter(|e| record.train_subjects.contains(&e.subject_id))
            .map(|e| e.t_rel)
            .collect();
        let th = record.thresholds;
        (values, th.fit, Some((th.lower, th.upper)))
    } else {
        let values: Vec<f64> = errors.iter().map(|e| e.t_rel).collect();
        let fit = fit_sign_gaussians(&values)?;
        (values, fit, None)
    };
    let (lower, upper) = bounds.map_or((String::new(), String::new()), |(l, u)| (l.to_string(), u.to_string()));
    let mut w = csv::Writer::from_path(run.path("histogram.csv"))?;
    w.write_record(["bin_center", "count", "fitted_pos_pdf", "fitted_neg_pdf", "lower", "upper"])?;
    for b in t_rel_histogram(&values, &fit, HISTOGRAM_BIN_WIDTH) {
        w.write_record([
            b.bin_center.to_string(),
            b.count.to_string(),
            b.fitted_pos_pdf.to_string(),
            b.fitted_neg_pdf.to_string(),
            lower.clone(),
            upper.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn stats(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let errors = load_time_errors(run.input("time_errors.csv", "synth` or `potp ingest")?)?;
    let tests = run_group_tests(&errors, cfg.rest_as_neutral)?;
    let mut w = csv::Writer::from_path(run.path("stats.csv"))?;
    w.write_record(["class", "n", "mean_t_rel", "tail", "t", "p", "direction"])?;
    for t in &tests {
        w.write_record([
            t.class.as_str().to_string(),
            t.n.to_string(),
            t.mean_t_rel.to_string(),
            tail_str(t.tail).to_string(),
            t.t_stat.to_string(),
            t.p_value.to_string(),
            t.direction.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    write_histogram(run, &errors)?;
    run.record("stats", cfg, None, vec!["stats.csv".into(), "histogram.csv".into()])
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn train(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let task = cfg.task;
    let (matrix, errors) = load_inputs(run)?;
    let pipeline_cfg = cfg.pipeline();
    let result = run_pipeline(&matrix, &errors, task, &pipeline_cfg, seed)?;
    info!(
        "{task}: chose {} with {} features, test score {:.3}",
        result.artifact.algorithm,
        result.artifact.selected_features.len(),
        result.test.headline()
    );

    let model = task_file("model", task, "json");
    let pipeline = task_file("pipeline", task, "json");
    let report = task_file("report", task, "csv");
    save_artifact(&result.artifact, run.path(&model))?;

    let mut w = csv::Writer::from_path(run.path(&report))?;
    w.write_record(["stage", "algorithm", "n_features", "cv_mean", "cv_std", "test_score"])?;
    for s in &result.stages {
        w.write_record([
            s.stage.clone(),
            s.algorithm.to_string(),
            s.n_features.to_string(),
            opt(s.cv_mean),
            opt(s.cv_std),
            opt(s.test_score),
        ])?;
    }
    w.flush()?;

    write_json(
        &run.path(&pipeline),
        &TrainRecord {
            config: pipeline_cfg,
            result,
        },
    )?;
    run.record(&format!("train:{task}"), cfg, Some(seed), vec![model, pipeline, report])
}

/// The task's labeled rows, split as during training.
fn split_data(run: &RunDir, task: Task) -> Result<(Dataset, Dataset), CliError> {
    let summary: TrainSummary = read_json(&run.input(&task_file("pipeline", task, "json"), &format!("train --task {task}"))?)?;
    let (matrix, errors) = load_inputs(run)?;
    let data = task_dataset(
        &matrix,
        &errors,
        task,
        summary.result.thresholds.as_ref(),
        summary.config.rest_as_neutral,
    )?;
    let plan = &summary.result.plan;
    let train = data.subset(&data.rows_of(&plan.train_subjects));
    let test = data.subset(&data.rows_of(&plan.test_subjects));
    Ok((train, test))
}

fn write_confusion(report: &EvalReport, classes: &[String], path: &Path) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(classes.iter().cloned());
    w.write_record(&header)?;
    for (c, row) in report.confusion.iter().enumerate() {
        let mut rec = vec![classes[c].clone()];
        rec.extend(row.iter().map(usize::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn evaluate_cmd(run: &RunDir, cfg: &RunConfig, model_path: Option<&Path>) -> Result<(), CliError> {
    let task = cfg.task;
    let default_model = task_file("model", task, "json");
    let artifact = match model_path {
        Some(p) => load_artifact(p)?,
        None => load_artifact(run.input(&default_model, &format!("train --task {task}"))?)?,
    };
    let (_, test) = split_data(run, task)?;
    if test.class_names != artifact.class_names {
        return Err(CliError::data(format!(
            "model classes {:?} do not match task {task}",
            artifact.class_names
        )));
    }
    let predictions = artifact.predict_named(&test.feature_names, &test.x)?;
    let report = evaluate(&test.y, &predictions, &test.class_names)?;
    info!("{task}: weighted F1 {:.3}, accuracy {:.3}", report.weighted_f1, report.accuracy);

    let json = task_file("evaluation", task, "json");
    let table = task_file("evaluation", task, "csv");
    let confusion = task_file("confusion", task, "csv");
    write_json(&run.path(&json), &report)?;
    let mut w = csv::Writer::from_path(run.path(&table))?;
    w.write_record(["class", "precision", "recall", "f1", "support"])?;
    for m in &report.per_class {
        w.write_record([
            m.class.clone(),
            m.precision.to_string(),
            m.recall.to_string(),
            m.f1.to_string(),
            m.support.to_string(),
        ])?;
    }
    let total: usize = report.per_class.iter().map(|m| m.support).sum();
    w.write_record([
        "weighted".to_string(),
        String::new(),
        String::new(),
        report.weighted_f1.to_string(),
        total.to_string(),
    ])?;
    w.flush()?;
    write_confusion(&report, &test.class_names, &run.path(&confusion))?;
    run.record(&format!("evaluate:{task}"), cfg, None, vec![json, table, confusion])
}

pub fn explain(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    let seed = cfg.require_seed()?;
    let task = cfg.task;
    let artifact = load_artifact(run.input(&task_file("model", task, "json"), &format!("train --task {task}"))?)?;
    let (train, test) = split_data(run, task)?;
    let cols = artifact.columns_in(&train.feature_names)?;
    let background = sample_background(&train.x.select_cols(&cols), cfg.explain.background, derive_seed(seed, "explain-background", 0));
    let rows: Matrix = sample_background(&test.x.select_cols(&cols), cfg.explain.rows, derive_seed(seed, "explain-rows", 0));
    info!(
        "explaining {} rows against {} background rows with {} samples each",
        rows.n_rows(),
        background.n_rows(),
        cfg.explain.samples
    );
    let attr = shapley_attributions(&artifact, &rows, &background, cfg.explain.samples, derive_seed(seed, "explain", 0))?;
    let attributions = task_file("attributions", task, "csv");
    let ranking = task_file("ranking", task, "csv");
    write_attributions_csv(&attr, run.path(&attributions))?;
    write_ranking_csv(&rank_features(&attr), &attr.classes, run.path(&ranking))?;
    run.record(&format!("explain:{task}"), cfg, Some(seed), vec![attributions, ranking])
}

fn segment_bars(run: &RunDir, errors: &[TimeError], path: &Path) -> Result<(), CliError> {
    let mut names: BTreeMap<u8, (String, String)> = BTreeMap::new();
    for m in run.session_manifests()? {
        let manifest: Manifest = read_json(&m)?;
        for s in manifest.segments {
            names.entry(s.index).or_insert((s.name, s.class.as_str().to_string()));
        }
    }
    let mut by_segment: BTreeMap<u8, Vec<f64>> = BTreeMap::new();
    for e in errors {
        by_segment.entry(e.segment_index).or_default().push(e.t_rel);
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["segment_index", "name", "class", "n", "mean_t_rel", "std_t_rel"])?;
    for (idx, vals) in &by_segment {
        let (name, class) = names.get(idx).cloned().unwrap_or_default();
        w.write_record([
            idx.to_string(),
            name,
            class,
            vals.len().to_string(),
            potp_core::stats::mean(vals).to_string(),
            potp_core::stats::population_std(vals).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn pipeline_figures(run: &RunDir, task: Task, record: &TrainRecord, outputs: &mut Vec<String>) -> Result<(), CliError> {
    let r = &record.result;
    let comparison = format!("report/algorithm_comparison_{task}.csv");
    let mut w = csv::Writer::from_path(run.path(&comparison))?;
    w.write_record(["algorithm", "cv_mean", "cv_std", "train_mean", "gap", "chosen"])?;
    for c in &r.selection.candidates {
        w.write_record([
            c.algorithm.to_string(),
            c.cv.mean.to_string(),
            c.cv.std.to_string(),
            c.train_mean.to_string(),
            c.gap.to_string(),
            (c.algorithm == r.selection.chosen).to_string(),
        ])?;
    }
    w.flush()?;
    outputs.push(comparison);

    let curve = format!("report/learning_curve_{task}.csv");
    let mut w = csv::Writer::from_path(run.path(&curve))?;
    w.write_record(["algorithm", "fraction", "train_mean", "train_std", "validation_mean", "validation_std"])?;
    for p in &r.learning_curve.points {
        w.write_record([
            r.learning_curve.algorithm.to_string(),
            p.fraction.to_string(),
            p.train.mean.to_string(),
            p.train.std.to_string(),
            p.validation.mean.to_string(),
            p.validation.std.to_string(),
        ])?;
    }
    w.flush()?;
    outputs.push(curve);

    let confusion = format!("report/confusion_{task}.csv");
    write_confusion(&r.test, &r.artifact.class_names, &run.path(&confusion))?;
    outputs.push(confusion);
    Ok(())
}

pub fn report(run: &RunDir, cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(run.path("report"))?;
    let mut outputs = Vec::new();
    let errors = load_time_errors(run.input("time_errors.csv", "synth` or `potp ingest")?)?;
    segment_bars(run, &errors, &run.path("report/segment_t_rel.csv"))?;
    outputs.push("report/segment_t_rel.csv".to_string());

    let copy = |from: &str, to: String, outputs: &mut Vec<String>| -> Result<(), CliError> {
        if run.path(from).exists() {
            fs::copy(run.path(from), run.path(&to))?;
            outputs.push(to);
        } else {
            warn!("{from} not found; skipping");
        }
        Ok(())
    };
    copy("histogram.csv", "report/t_rel_histogram.csv".into(), &mut outputs)?;
    for task in [Task::State3, Task::Potp2] {
        let pipeline = run.path(&task_file("pipeline", task, "json"));
        if pipeline.exists() {
            let record: TrainRecord = read_json(&pipeline)?;
            pipeline_figures(run, task, &record, &mut outputs)?;
        } else {
            warn!("{} not found; skipping {task} figures", pipeline.display());
        }
        copy(&task_file("ranking", task, "csv"), format!("report/ranking_{task}.csv"), &mut outputs)?;
    }
    run.record("report", cfg, None, outputs)
}
