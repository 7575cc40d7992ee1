//! Window segmentation and the window-level feature table.

mod extract;
mod registry;

pub use extract::{
    extract_ecg_features, extract_eda_features, extract_ppg_features, extract_rsp_features,
    extract_skt_features, poincare, Partial, HF, INTERVAL_TOTAL, LF, RSP_FINE, RSP_HF, RSP_TOTAL, VLF,
};
pub use registry::{feature_index, feature_names, registry, FeatureGroup, FeatureInfo};

use std::collections::HashSet;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, FeatureMatrix, FeatureRow, Modality, Session, SignalChannel};
use crate::dsp::{
    decompose_eda, delineate_ppg, detect_r_peaks, detect_resp_cycles, respiration_band, EdaComponents,
    PpgPulses, RRSeries, RespCycles,
};

pub const DEFAULT_WINDOW_S: f64 = 45.0;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("window [{start_s}, {end_s}) s lies outside the {modality:?} channel")]
    OutsideChannel {
        modality: Modality,
        start_s: f64,
        end_s: f64,
    },
    #[error("duplicate subject id {0:?}")]
    DuplicateSubject(String),
    #[error("window length must be positive, got {0}")]
    InvalidWindow(f64),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub subject_id: String,
    pub segment_index: u8,
    pub window_index: u32,
    pub start_s: f64,
    pub len_s: f64,
}

impl Window {
    pub fn end_s(&self) -> f64 {
        self.start_s + self.len_s
    }
}

/// Back-to-back windows from each segment's start; the remainder is dropped.
pub fn segment_windows(session: &Session, len_s: f64) -> Vec<Window> {
    let mut out = Vec::new();
    for seg in &session.segments {
        let n = ((seg.end_s - seg.start_s) / len_s + 1e-9).floor() as u32;
        out.extend((0..n).map(|k| Window {
            subject_id: session.subject_id.clone(),
            segment_index: seg.index,
            window_index: k,
            start_s: seg.start_s + k as f64 * len_s,
            len_s,
        }));
    }
    out
}

/// Feature values for one window, in registry order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub window: Window,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(window: Window) -> Self {
        Self {
            window,
            values: vec![f64::NAN; registry().len()],
        }
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }

    pub fn merge(&mut self, partial: Partial) {
        for (name, v) in partial {
            match feature_index(&name) {
                Some(i) => self.values[i] = v,
                None => panic!("extractor produced unregistered feature {name}"),
            }
        }
    }
}

/// Session-wide delineation shared by all windows.
struct Prepared<'a> {
    skt: Option<&'a SignalChannel>,
    eda: Option<EdaComponents>,
    rsp: Option<(RespCycles, SignalChannel)>,
    rr: Option<RRSeries>,
    ppg: Option<PpgPulses>,
}

fn prepare(session: &Session) -> Prepared<'_> {
    let sid = &session.subject_id;
    let report = |what: &str, e: &dyn std::fmt::Display| warn!("{sid}: {what}: {e}");
    let eda = session.channel(Modality::Eda).and_then(|c| {
        decompose_eda(c)
            .map_err(|e| report("EDA decomposition failed", &e))
            .ok()
    });
    let rsp = session.channel(Modality::Rsp).and_then(|c| {
        let band = respiration_band(c)
            .map_err(|e| report("respiration filter failed", &e))
            .ok()?;
        let cycles = detect_resp_cycles(c).unwrap_or_else(|e| {
            report("breath detection failed", &e);
            RespCycles::default()
        });
        Some((cycles, band))
    });
    let rr = session.channel(Modality::Ecg).map(|c| {
        detect_r_peaks(c).unwrap_or_else(|e| {
            report("R-peak detection failed", &e);
            RRSeries::default()
        })
    });
    let ppg = session.channel(Modality::Ppg).map(|c| {
        delineate_ppg(c).unwrap_or_else(|e| {
            report("PPG delineation failed", &e);
            PpgPulses::default()
        })
    });
    Prepared {
        skt: session.channel(Modality::Skt),
        eda,
        rsp,
        rr,
        ppg,
    }
}

fn window_features(p: &Prepared, win: Window) -> Result<FeatureVector, FeatureError> {
    let mut fv = FeatureVector::new(win);
    let w = fv.window.clone();
    if let Some(skt) = p.skt {
        fv.merge(extract_skt_features(&w, skt)?);
    }
    if let Some(eda) = &p.eda {
        fv.merge(extract_eda_features(&w, eda)?);
    }
    if let Some((cycles, band)) = &p.rsp {
        fv.merge(extract_rsp_features(&w, cycles, band)?);
    }
    if let Some(rr) = &p.rr {
        fv.merge(extract_ecg_features(&w, rr)?);
    }
    if let Some(ppg) = &p.ppg {
        fv.merge(extract_ppg_features(&w, ppg)?);
    }
    Ok(fv)
}

/// All windows of one session.
pub fn session_features(session: &Session, window_len_s: f64) -> Result<Vec<FeatureVector>, FeatureError> {
    if !(window_len_s > 0.0) {
        return Err(FeatureError::InvalidWindow(window_len_s));
    }
    let prepared = prepare(session);
    segment_windows(session, window_len_s)
        .into_iter()
        .map(|w| window_features(&prepared, w))
        .collect()
}

/// One row per window across all sessions, ordered by subject, segment and window.
pub fn build_feature_matrix(sessions: &[Session], window_len_s: f64) -> Result<FeatureMatrix, FeatureError> {
    let mut seen = HashSet::new();
    for s in sessions {
        if !seen.insert(s.subject_id.as_str()) {
            return Err(FeatureError::DuplicateSubject(s.subject_id.clone()));
        }
    }
    let per_session: Vec<Vec<FeatureVector>> = sessions
        .par_iter()
        .map(|s| session_features(s, window_len_s))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<FeatureRow> = per_session
        .into_iter()
        .flatten()
        .map(|fv| FeatureRow {
            subject_id: fv.window.subject_id,
            segment_index: fv.window.segment_index,
            window_index: fv.window.window_index,
            values: fv.values,
        })
        .collect();
    rows.sort_by(|a, b| {
        (&a.subject_id, a.segment_index, a.window_index).cmp(&(&b.subject_id, b.segment_index, b.window_index))
    });
    let mut m = FeatureMatrix::new(feature_names())?;
    m.extend(rows)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ProtocolTemplate, Segment, SegmentClass};
    use std::collections::BTreeMap;

    fn session_with(segments: Vec<Segment>, secs: f64, id: &str) -> Session {
        let mut channels = BTreeMap::new();
        let n = (4.0 * secs) as usize;
        channels.insert(
            Modality::Skt,
            SignalChannel::new(Modality::Skt, 4.0, 0.0, (0..n).map(|i| 33.0 + i as f64 * 1e-3).collect()).unwrap(),
        );
        Session::new(id, channels, segments).unwrap()
    }

    #[test]
    fn protocol_window_counts() {
        let p = ProtocolTemplate::default();
        let s = session_with(p.segments(0.0), p.total_duration_s(), "a");
        let wins = segment_windows(&s, DEFAULT_WINDOW_S);
        let counts: Vec<usize> = (1..=9)
            .map(|k| wins.iter().filter(|w| w.segment_index == k).count())
            .collect();
        assert_eq!(counts, vec![4, 2, 2, 2, 4, 2, 2, 2, 4]);
        assert_eq!(wins.len(), 24);
    }

    fn single(dur: f64) -> Vec<Segment> {
        vec![Segment {
            index: 1,
            name: "x".into(),
            class: SegmentClass::Rest,
            start_s: 5.0,
            end_s: 5.0 + dur,
            t_perceived_s: None,
            vass: None,
        }]
    }

    #[test]
    fn short_and_exact_segments() {
        let s = session_with(single(44.0), 60.0, "a");
        assert!(segment_windows(&s, 45.0).is_empty());
        let s = session_with(single(90.0), 100.0, "a");
        let w = segment_windows(&s, 45.0);
        let starts: Vec<f64> = w.iter().map(|w| w.start_s).collect();
        assert_eq!(starts, vec![5.0, 50.0]);
    }

    #[test]
    fn matrix_rows_and_nan_for_missing_channels() {
        let s = session_with(single(90.0), 100.0, "a");
        let m = build_feature_matrix(&[s], 45.0).unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.columns().len(), registry().len());
        let i = m.column_index("SKT_gradient").unwrap();
        assert!((m.rows()[0].values[i] - 4e-3).abs() < 1e-9);
        let j = m.column_index("ECG_RR_mean").unwrap();
        assert!(m.rows()[0].values[j].is_nan());
    }

    #[test]
    fn duplicate_subject_rejected() {
        let s = session_with(single(90.0), 100.0, "a");
        assert!(matches!(
            build_feature_matrix(&[s.clone(), s], 45.0),
            Err(FeatureError::DuplicateSubject(_))
        ));
    }
}
