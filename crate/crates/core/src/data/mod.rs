//! Session data model: channels, protocol segments and recordings.

mod matrix;
mod session_io;

pub use matrix::{load_feature_matrix, save_feature_matrix, FeatureMatrix, FeatureRow};
pub use session_io::{load_session, save_session, ChannelEntry, Manifest, SegmentEntry};

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid manifest: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("empty protocol")]
    EmptyProtocol,
    #[error("segment {next} overlaps or precedes segment {prev}")]
    SegmentOverlap { prev: u8, next: u8 },
    #[error("segment {index}: {reason}")]
    InvalidSegment { index: u8, reason: String },
    #[error("invalid {modality} channel: {reason}")]
    InvalidChannel { modality: Modality, reason: String },
    #[error("channel underruns protocol: {modality} covers {available_s:.3} s, protocol needs {needed_s:.3} s")]
    ChannelUnderrun {
        modality: Modality,
        needed_s: f64,
        available_s: f64,
    },
    #[error("duplicate column {0:?}")]
    DuplicateColumn(String),
    #[error("row has {got} values, matrix has {expected} columns")]
    RowWidth { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "ECG")]
    Ecg,
    #[serde(rename = "PPG")]
    Ppg,
    #[serde(rename = "EDA")]
    Eda,
    #[serde(rename = "SKT")]
    Skt,
    #[serde(rename = "RSP")]
    Rsp,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::Ecg,
        Modality::Ppg,
        Modality::Eda,
        Modality::Skt,
        Modality::Rsp,
    ];

    /// Sampling rate assumed when a manifest does not state one.
    pub fn default_fs(self) -> f64 {
        match self {
            Modality::Ecg => 256.0,
            Modality::Ppg => 64.0,
            Modality::Eda => 4.0,
            Modality::Skt => 4.0,
            Modality::Rsp => 32.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Ecg => "ECG",
            Modality::Ppg => "PPG",
            Modality::Eda => "EDA",
            Modality::Skt => "SKT",
            Modality::Rsp => "RSP",
        }
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A uniformly sampled recording of one modality.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalChannel {
    pub modality: Modality,
    pub fs: f64,
    /// Session-relative time of the first sample, in seconds.
    pub t0: f64,
    pub samples: Vec<f64>,
}

impl SignalChannel {
    pub fn new(modality: Modality, fs: f64, t0: f64, samples: Vec<f64>) -> Result<Self, DataError> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(DataError::InvalidChannel {
                modality,
                reason: format!("sampling rate must be positive, got {fs}"),
            });
        }
        if !t0.is_finite() {
            return Err(DataError::InvalidChannel {
                modality,
                reason: "non-finite start time".into(),
            });
        }
        if samples.is_empty() {
            return Err(DataError::InvalidChannel {
                modality,
                reason: "no samples".into(),
            });
        }
        Ok(Self {
            modality,
            fs,
            t0,
            samples,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    /// Session time just past the last sample.
    pub fn end_s(&self) -> f64 {
        self.t0 + self.duration_s()
    }

    pub fn time_of(&self, index: f64) -> f64 {
        self.t0 + index / self.fs
    }

    /// Sample index at or before session time `t` (may be out of range).
    pub fn index_at(&self, t: f64) -> i64 {
        ((t - self.t0) * self.fs + 1e-9).floor() as i64
    }

    /// Index range `[floor((start-t0)fs), floor((end-t0)fs))`, or `None` if it leaves the record.
    pub fn range_for(&self, start_s: f64, end_s: f64) -> Option<std::ops::Range<usize>> {
        let a = self.index_at(start_s);
        let b = self.index_at(end_s);
        if a < 0 || b < a || b as usize > self.samples.len() {
            return None;
        }
        Some(a as usize..b as usize)
    }

    pub fn with_samples(&self, samples: Vec<f64>) -> Self {
        Self {
            modality: self.modality,
            fs: self.fs,
            t0: self.t0,
            samples,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SegmentClass {
    Rest,
    Neutral,
    Emotional,
    Cognitive,
}

impl SegmentClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentClass::Rest => "Rest",
            SegmentClass::Neutral => "Neutral",
            SegmentClass::Emotional => "Emotional",
            SegmentClass::Cognitive => "Cognitive",
        }
    }
}

/// Answers on the duration questionnaire are multiples of this step.
pub const PERCEIVED_STEP_S: f64 = 30.0;
pub const PERCEIVED_MAX_S: f64 = 300.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub index: u8,
    pub name: String,
    pub class: SegmentClass,
    pub start_s: f64,
    pub end_s: f64,
    pub t_perceived_s: Option<f64>,
    pub vass: Option<u8>,
}

impl Segment {
    pub fn t_correct(&self) -> f64 {
        self.end_s - self.start_s
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let bad = |reason: String| DataError::InvalidSegment {
            index: self.index,
            reason,
        };
        if !(1..=9).contains(&self.index) {
            return Err(bad(format!("index must be in 1..=9, got {}", self.index)));
        }
        if !(self.start_s.is_finite() && self.end_s.is_finite()) || self.end_s <= self.start_s {
            return Err(bad(format!(
                "end ({}) must be after start ({})",
                self.end_s, self.start_s
            )));
        }
        if let Some(p) = self.t_perceived_s {
            if !is_questionnaire_value(p) {
                return Err(bad(format!(
                    "perceived duration {p} s is not a multiple of 30 s in 0..=300"
                )));
            }
        }
        if let Some(v) = self.vass {
            if v > 100 {
                return Err(bad(format!("VASS {v} outside 0..=100")));
            }
        }
        Ok(())
    }
}

pub fn is_questionnaire_value(p: f64) -> bool {
    (0.0..=PERCEIVED_MAX_S).contains(&p) && (p / PERCEIVED_STEP_S).fract() == 0.0
}

/// One subject's recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub subject_id: String,
    pub channels: BTreeMap<Modality, SignalChannel>,
    pub segments: Vec<Segment>,
}

impl Session {
    pub fn new(
        subject_id: impl Into<String>,
        channels: BTreeMap<Modality, SignalChannel>,
        segments: Vec<Segment>,
    ) -> Result<Self, DataError> {
        let session = Self {
            subject_id: subject_id.into(),
            channels,
            segments,
        };
        session.validate()?;
        Ok(session)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        if self.segments.is_empty() {
            return Err(DataError::EmptyProtocol);
        }
        for seg in &self.segments {
            seg.validate()?;
        }
        for pair in self.segments.windows(2) {
            if pair[1].start_s < pair[0].end_s || pair[1].index <= pair[0].index {
                return Err(DataError::SegmentOverlap {
                    prev: pair[0].index,
                    next: pair[1].index,
                });
            }
        }
        let first = self.segments[0].start_s;
        let last = self.segments[self.segments.len() - 1].end_s;
        for ch in self.channels.values() {
            let covered = self
                .segments
                .iter()
                .all(|s| ch.range_for(s.start_s, s.end_s).is_some());
            if !covered {
                return Err(DataError::ChannelUnderrun {
                    modality: ch.modality,
                    needed_s: last - first,
                    available_s: (ch.end_s() - first.max(ch.t0)).max(0.0),
                });
            }
        }
        Ok(())
    }

    pub fn channel(&self, modality: Modality) -> Option<&SignalChannel> {
        self.channels.get(&modality)
    }

    pub fn segment(&self, index: u8) -> Option<&Segment> {
        self.segments.iter().find(|s| s.index == index)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStep {
    pub name: String,
    pub class: SegmentClass,
    pub duration_s: f64,
}

/// Ordered list of protocol steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolTemplate {
    pub steps: Vec<ProtocolStep>,
}

impl Default for ProtocolTemplate {
    /// The nine-step induction protocol (19.5 min in total).
    fn default() -> Self {
        let steps = [
            ("Relaxation audio", SegmentClass::Rest, 180.0),
            ("Neutral clip", SegmentClass::Neutral, 120.0),
            ("Rest", SegmentClass::Neutral, 120.0),
            ("Fear clip", SegmentClass::Emotional, 120.0),
            ("Mathematics task", SegmentClass::Cognitive, 180.0),
            ("Rest", SegmentClass::Rest, 90.0),
            ("Stroop color test", SegmentClass::Cognitive, 90.0),
            ("Sadness clip", SegmentClass::Emotional, 90.0),
            ("Rest", SegmentClass::Rest, 180.0),
        ];
        Self {
            steps: steps
                .into_iter()
                .map(|(name, class, duration_s)| ProtocolStep {
                    name: name.to_string(),
                    class,
                    duration_s,
                })
                .collect(),
        }
    }
}

impl ProtocolTemplate {
    pub fn total_duration_s(&self) -> f64 {
        self.steps.iter().map(|s| s.duration_s).sum()
    }

    /// Lay the steps out back to back starting at `start_s`.
    pub fn segments(&self, start_s: f64) -> Vec<Segment> {
        let mut t = start_s;
        self.steps
            .iter()
            .enumerate()
            .map(|(i, step)| {
                let seg = Segment {
                    index: (i + 1) as u8,
                    name: step.name.clone(),
                    class: step.class,
                    start_s: t,
                    end_s: t + step.duration_s,
                    t_perceived_s: None,
                    vass: None,
                };
                t += step.duration_s;
                seg
            })
            .collect()
    }
}
