//! Tonic/phasic split of skin conductance by low-pass filtering.

use super::{filter::Butterworth, DspError};
use crate::data::SignalChannel;

/// Tonic level cutoff.
pub const SCL_CUTOFF_HZ: f64 = 0.05;
const PREFILTER_HZ: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct EdaComponents {
    pub fs: f64,
    pub t0: f64,
    /// Low-passed EDA, the signal being decomposed.
    pub filtered: Vec<f64>,
    /// Tonic skin conductance level, µS.
    pub scl: Vec<f64>,
    /// Phasic residual `filtered - scl`, µS.
    pub scr: Vec<f64>,
}

impl EdaComponents {
    pub fn time_of(&self, i: usize) -> f64 {
        self.t0 + i as f64 / self.fs
    }
}

pub fn decompose_eda(eda: &SignalChannel) -> Result<EdaComponents, DspError> {
    let fs = eda.fs;
    if !(fs >= 2.0) {
        return Err(DspError::RateTooLow { fs, min: 2.0 });
    }
    let cutoff = PREFILTER_HZ.min(0.4 * fs);
    let filtered = Butterworth::lowpass(2, cutoff, fs)?.filtfilt(&eda.samples)?;
    let scl = Butterworth::lowpass(2, SCL_CUTOFF_HZ, fs)?.filtfilt(&filtered)?;
    let scr = filtered.iter().zip(&scl).map(|(f, l)| f - l).collect();
    Ok(EdaComponents {
        fs,
        t0: eda.t0,
        filtered,
        scl,
        scr,
    })
}
