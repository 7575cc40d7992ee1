//! Run configuration: a JSON file whose values command-line flags override.

use std::fs;
use std::path::{Path, PathBuf};

use potp_core::explain::{DEFAULT_BACKGROUND, DEFAULT_SAMPLES};
use potp_core::features::{registry, FeatureGroup};
use potp_core::labeling::ThresholdOverride;
use potp_core::ml::{Algorithm, PipelineConfig, Task, TpeConfig};
use potp_core::synth::Scenario;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    /// Test rows to explain.
    pub rows: usize,
    pub samples: usize,
    pub background: usize,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        Self {
            rows: 50,
            samples: DEFAULT_SAMPLES,
            background: DEFAULT_BACKGROUND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub run_dir: Option<PathBuf>,
    /// Directory of recorded sessions for `ingest`.
    pub sessions_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub window_len_s: f64,
    pub thresholds: ThresholdOverride,
    pub task: Task,
    pub tpe_budget: Option<usize>,
    pub algorithms: Vec<Algorithm>,
    pub rfecv: bool,
    pub rest_as_neutral: bool,
    /// Feature groups left out of the feature table, e.g. `["PPG"]`.
    pub disabled_groups: Vec<String>,
    pub scenario: Scenario,
    pub subjects: usize,
    pub explain: ExplainConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            run_dir: None,
            sessions_dir: None,
            seed: None,
            window_len_s: 45.0,
            thresholds: ThresholdOverride::default(),
            task: Task::State3,
            tpe_budget: None,
            algorithms: Algorithm::ALL.to_vec(),
            rfecv: true,
            rest_as_neutral: false,
            disabled_groups: Vec::new(),
            scenario: Scenario::PaperLike,
            subjects: 18,
            explain: ExplainConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if !(self.window_len_s > 0.0 && self.window_len_s.is_finite()) {
            return Err(CliError::Usage(format!("window length must be positive, got {}", self.window_len_s)));
        }
        if self.subjects == 0 {
            return Err(CliError::Usage("at least one subject is needed".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Usage("no algorithms selected".into()));
        }
        if self.tpe_budget == Some(0) {
            return Err(CliError::Usage("TPE budget must be at least 1".into()));
        }
        if self.explain.rows == 0 || self.explain.samples == 0 || self.explain.background == 0 {
            return Err(CliError::Usage("explain rows, samples and background must be positive".into()));
        }
        self.disabled()?;
        Ok(())
    }

    pub fn require_seed(&self) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage("this step is stochastic: pass --seed or set \"seed\" in the config".into()))
    }

    pub fn disabled(&self) -> Result<Vec<FeatureGroup>, CliError> {
        self.disabled_groups
            .iter()
            .map(|name| {
                registry()
                    .iter()
                    .map(|f| f.group)
                    .find(|g| g.as_str().eq_ignore_ascii_case(name))
                    .ok_or_else(|| CliError::Usage(format!("unknown feature group {name:?} (expected SKT, EDA, RSP, ECG or PPG)")))
            })
            .collect()
    }

    pub fn pipeline(&self) -> PipelineConfig {
        let mut tpe = TpeConfig::default();
        if let Some(b) = self.tpe_budget {
            tpe.budget = b;
            tpe.n_startup = tpe.n_startup.min(b);
        }
        PipelineConfig {
            algorithms: self.algorithms.clone(),
            tpe,
            rest_as_neutral: self.rest_as_neutral,
            rfecv: self.rfecv,
            thresholds: self.thresholds,
            ..PipelineConfig::default()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let c: RunConfig = serde_json::from_str(r#"{"seed": 7, "explain": {"rows": 3}}"#).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.window_len_s, 45.0);
        assert_eq!(c.explain.rows, 3);
        assert_eq!(c.explain.samples, DEFAULT_SAMPLES);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"sede": 7}"#).is_err());
    }

    #[test]
    fn hash_tracks_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed = Some(1);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn validation() {
        let mut c = RunConfig::default();
        assert!(c.validate().is_ok());
        c.window_len_s = 0.0;
        assert!(c.validate().is_err());
        let c = RunConfig {
            disabled_groups: vec!["ppg".into()],
            ..RunConfig::default()
        };
        assert_eq!(c.disabled().unwrap(), vec![FeatureGroup::Ppg]);
        let c = RunConfig {
            disabled_groups: vec!["EEG".into()],
            ..RunConfig::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn small_budget_shrinks_startup() {
        let c = RunConfig {
            tpe_budget: Some(4),
            ..RunConfig::default()
        };
        let p = c.pipeline();
        assert_eq!(p.tpe.budget, 4);
        assert_eq!(p.tpe.n_startup, 4);
    }
}
