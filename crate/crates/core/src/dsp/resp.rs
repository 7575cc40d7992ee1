//! Breath delineation from the respiration waveform.

use super::{argmax, argmin, filter::Butterworth, mean, parabolic_offset, variance, DspError};
use crate::data::SignalChannel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Breath {
    pub onset_s: f64,
    pub insp_end_s: f64,
    pub exp_end_s: f64,
}

impl Breath {
    pub fn insp_time(&self) -> f64 {
        self.insp_end_s - self.onset_s
    }
    pub fn exp_time(&self) -> f64 {
        self.exp_end_s - self.insp_end_s
    }
    pub fn period(&self) -> f64 {
        self.exp_end_s - self.onset_s
    }
    /// Breaths per minute.
    pub fn rate(&self) -> f64 {
        60.0 / self.period()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RespCycles {
    pub breaths: Vec<Breath>,
}

const BAND: (f64, f64) = (0.05, 1.0);

/// Respiration restricted to 0.05–1 Hz.
pub fn respiration_band(rsp: &SignalChannel) -> Result<SignalChannel, DspError> {
    let fs = rsp.fs;
    let x = if fs / 2.0 > BAND.1 {
        Butterworth::bandpass(2, BAND.0, BAND.1, fs)?.filtfilt(&rsp.samples)?
    } else {
        Butterworth::highpass(2, BAND.0, fs)?.filtfilt(&rsp.samples)?
    };
    Ok(rsp.with_samples(x))
}

const LANDMARK_HI_HZ: f64 = 4.0;
const LANDMARK_REACH_S: f64 = 0.3;

fn landmark_band(rsp: &SignalChannel) -> Result<Vec<f64>, DspError> {
    let hi = LANDMARK_HI_HZ.min(0.35 * rsp.fs);
    if hi <= BAND.1 {
        return respiration_band(rsp).map(|c| c.samples);
    }
    Butterworth::bandpass(2, BAND.0, hi, rsp.fs)?.filtfilt(&rsp.samples)
}

/// Breaths run trough → peak → trough, split at upward crossings of the
/// mean with a hysteresis of 0.2 standard deviations. Extrema found on the
/// respiration band are moved to the matching extremum of a wider band,
/// since the 1 Hz edge drags skewed extrema towards their flatter side.
pub fn detect_resp_cycles(rsp: &SignalChannel) -> Result<RespCycles, DspError> {
    let x = respiration_band(rsp)?.samples;
    let sd = variance(&x).sqrt();
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sd <= 1e-9 * scale.max(1e-300) || sd == 0.0 {
        return Err(DspError::InsufficientCycles { found: 0 });
    }
    let m = mean(&x);
    let h = 0.2 * sd;

    let mut ups = Vec::new();
    let mut armed = false;
    let mut last_below = 0;
    for (i, &v) in x.iter().enumerate() {
        let d = v - m;
        if d < -h {
            armed = true;
        }
        if d < 0.0 {
            last_below = i;
        }
        if armed && d > h {
            ups.push(last_below + 1);
            armed = false;
        }
    }

    let y = landmark_band(rsp)?;
    let reach = (LANDMARK_REACH_S * rsp.fs).ceil() as usize;
    let near = |i: usize| (i.saturating_sub(reach), (i + reach + 1).min(y.len()));
    let snap_max = |i: usize| {
        let (lo, hi) = near(i);
        lo + argmax(&y[lo..hi])
    };
    let snap_min = |i: usize| {
        let (lo, hi) = near(i);
        lo + argmin(&y[lo..hi])
    };
    let refine = |i: usize| rsp.time_of(i as f64 + parabolic_offset(&y, i));
    let mut extrema = Vec::new();
    for w in ups.windows(2) {
        let (a, b) = (w[0], w[1]);
        let peak = a + argmax(&x[a..b]);
        let trough = peak + argmin(&x[peak..b]);
        extrema.push((snap_max(peak), snap_min(trough)));
    }
    let mut breaths = Vec::new();
    for w in extrema.windows(2) {
        let onset = w[0].1;
        let (peak, trough) = w[1];
        if onset < peak && peak < trough {
            breaths.push(Breath {
                onset_s: refine(onset),
                insp_end_s: refine(peak),
                exp_end_s: refine(trough),
            });
        }
    }
    if breaths.len() < 2 {
        return Err(DspError::InsufficientCycles {
            found: breaths.len(),
        });
    }
    Ok(RespCycles { breaths })
}
