//! Layout of a run directory and its step manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use potp_core::ml::Task;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const MANIFEST: &str = "run_manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub config: RunConfig,
    /// Paths relative to the run directory.
    pub outputs: Vec<String>,
    pub finished_unix_s: u64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunManifest {
    pub steps: BTreeMap<String, StepRecord>,
}

pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root)?;
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn open(root: &Path) -> Result<Self, CliError> {
        if !root.is_dir() {
            return Err(CliError::data(format!("run directory {} does not exist", root.display())));
        }
        Ok(Self { root: root.to_path_buf() })
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of an input that an earlier step writes.
    pub fn input(&self, rel: &str, producer: &str) -> Result<PathBuf, CliError> {
        let p = self.path(rel);
        if p.exists() {
            Ok(p)
        } else {
            Err(CliError::data(format!("{} is missing; run `potp {producer}` first", p.display())))
        }
    }

    pub fn sessions_dir(&self) -> PathBuf {
        self.path("sessions")
    }

    /// Session manifests in subject order.
    pub fn session_manifests(&self) -> Result<Vec<PathBuf>, CliError> {
        let dir = self.sessions_dir();
        if !dir.is_dir() {
            return Err(CliError::data(format!(
                "{} is missing; run `potp synth` or `potp ingest` first",
                dir.display()
            )));
        }
        let found = manifests_under(&dir)?;
        if found.is_empty() {
            return Err(CliError::data(format!("no sessions under {}", dir.display())));
        }
        Ok(found)
    }

    pub fn record(&self, step: &str, config: &RunConfig, seed: Option<u64>, outputs: Vec<String>) -> Result<(), CliError> {
        let path = self.path(MANIFEST);
        let mut manifest: RunManifest = if path.exists() {
            serde_json::from_str(&fs::read_to_string(&path)?)?
        } else {
            RunManifest::default()
        };
        let finished_unix_s = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        manifest.steps.insert(
            step.to_string(),
            StepRecord {
                config_hash: config.hash(),
                seed,
                config: config.clone(),
                outputs,
                finished_unix_s,
            },
        );
        fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
        Ok(())
    }
}

/// `dir/*/manifest.json`, sorted, plus `dir/manifest.json` itself.
pub fn manifests_under(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut found = Vec::new();
    let own = dir.join("manifest.json");
    if own.is_file() {
        found.push(own);
    }
    for entry in fs::read_dir(dir)? {
        let m = entry?.path().join("manifest.json");
        if m.is_file() {
            found.push(m);
        }
    }
    found.sort();
    Ok(found)
}

pub fn task_file(stem: &str, task: Task, ext: &str) -> String {
    format!("{stem}_{}.{ext}", task.as_str())
}
