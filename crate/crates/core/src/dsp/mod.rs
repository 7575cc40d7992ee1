//! Filtering and delineation of raw channels into physiological events.

mod ecg;
mod eda;
pub mod filter;
mod ppg;
mod resp;

pub use ecg::{detect_r_peaks, RRSeries, RR_PLAUSIBLE_S};
pub use eda::{decompose_eda, EdaComponents, SCL_CUTOFF_HZ};
pub use filter::{bandpass, lowpass, Butterworth};
pub use ppg::{delineate_ppg, PpgPulse, PpgPulses};
pub use resp::{detect_resp_cycles, respiration_band, Breath, RespCycles};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("invalid band [{lo}, {hi}] Hz for Nyquist {nyquist} Hz")]
    InvalidBand { lo: f64, hi: f64, nyquist: f64 },
    #[error("signal too short for filter: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("sampling rate {fs} Hz below the required {min} Hz")]
    RateTooLow { fs: f64, min: f64 },
    #[error("record of {got:.1} s shorter than the required {min:.1} s")]
    RecordTooShort { got: f64, min: f64 },
    #[error("no QRS detected")]
    NoQrs,
    #[error("insufficient cycles: found {found} complete breaths")]
    InsufficientCycles { found: usize },
    #[error("no pulses found")]
    NoPulses,
}

/// Sub-sample position of an extremum at `i` by a parabola through its neighbours.
pub(crate) fn parabolic_offset(x: &[f64], i: usize) -> f64 {
    if i == 0 || i + 1 >= x.len() {
        return 0.0;
    }
    let (a, b, c) = (x[i - 1], x[i], x[i + 1]);
    let den = a - 2.0 * b + c;
    if den == 0.0 {
        return 0.0;
    }
    (0.5 * (a - c) / den).clamp(-0.5, 0.5)
}

/// Sub-sample extremum near `i` from a Catmull-Rom spline through the
/// neighbouring samples, searched on a 1/32-sample grid over `[i-1, i+1]`.
/// Less biased than a parabola when the two flanks have different curvature.
pub(crate) fn spline_extremum(x: &[f64], i: usize, maximum: bool) -> f64 {
    let n = x.len();
    if i < 2 || i + 2 >= n {
        return i as f64 + parabolic_offset(x, i);
    }
    let at = |j: usize, u: f64| {
        let (p0, p1, p2, p3) = (x[j - 1], x[j], x[j + 1], x[j + 2]);
        0.5 * (2.0 * p1
            + (p2 - p0) * u
            + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * u * u
            + (3.0 * (p1 - p2) + p3 - p0) * u * u * u)
    };
    const STEPS: usize = 32;
    let mut best = (i as f64, x[i]);
    for j in [i - 1, i] {
        for k in 0..=STEPS {
            let u = k as f64 / STEPS as f64;
            let v = at(j, u);
            if (maximum && v > best.1) || (!maximum && v < best.1) {
                best = (j as f64 + u, v);
            }
        }
    }
    best.0
}

pub(crate) fn argmax(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v > x[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn argmin(x: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in x.iter().enumerate() {
        if *v < x[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}
