//! Deterministic waveform primitives with exactly known landmarks.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

fn gauss(t: f64, center: f64, sigma: f64) -> f64 {
    let z = (t - center) / sigma;
    (-0.5 * z * z).exp()
}

/// Gaussian-bump ECG: P, R and T waves around each beat time. The R peak
/// sits exactly on the beat time.
pub fn ecg(beat_times: &[f64], fs: f64, t0: f64, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    // (offset s, sigma s, amplitude mV)
    const WAVES: [(f64, f64, f64); 3] = [(-0.16, 0.025, 0.12), (0.0, 0.010, 1.0), (0.26, 0.040, 0.30)];
    for &beat in beat_times {
        for (offset, sigma, amp) in WAVES {
            let c = beat + offset;
            let lo = ((c - 5.0 * sigma - t0) * fs).floor().max(0.0) as usize;
            let hi = (((c + 5.0 * sigma - t0) * fs).ceil().max(0.0) as usize).min(n);
            for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
                *v += amp * gauss(t0 + i as f64 / fs, c, sigma);
            }
        }
    }
    x
}

/// One breath: starts at `onset` (a trough), peaks after `insp_frac * period`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreathSpec {
    pub onset: f64,
    pub period: f64,
    pub insp_frac: f64,
}

/// Asymmetric half-cosine breathing, -1 at onsets and +1 at end of inspiration.
/// Outside the listed breaths the signal holds its boundary value.
pub fn respiration(breaths: &[BreathSpec], fs: f64, t0: f64, n: usize) -> Vec<f64> {
    let mut x = vec![-1.0; n];
    let mut k = 0;
    for (i, v) in x.iter_mut().enumerate() {
        let t = t0 + i as f64 / fs;
        while k + 1 < breaths.len() && t >= breaths[k].onset + breaths[k].period {
            k += 1;
        }
        let Some(b) = breaths.get(k) else { break };
        let u = t - b.onset;
        if u < 0.0 || u >= b.period {
            continue;
        }
        let insp = b.insp_frac * b.period;
        *v = if u < insp {
            -(PI * u / insp).cos()
        } else {
            (PI * (u - insp) / (b.period - insp)).cos()
        };
    }
    x
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseSpec {
    pub foot: f64,
    pub period: f64,
    pub rise: f64,
    /// Foot-to-reflected-wave delay.
    pub reflected: f64,
}

pub const REFLECTED_SIGMA_S: f64 = 0.035;
pub const REFLECTED_AMPLITUDE: f64 = 0.25;

/// Pulse train: half-cosine rise from each foot to its peak, half-cosine
/// decay to the next foot, plus a Gaussian reflected wave on the decay.
pub fn ppg(pulses: &[PulseSpec], fs: f64, t0: f64, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for p in pulses {
        let lo = ((p.foot - t0) * fs).ceil().max(0.0) as usize;
        let hi = (((p.foot + p.period - t0) * fs).ceil().max(0.0) as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            let u = t0 + i as f64 / fs - p.foot;
            *v += if u < p.rise {
                0.5 * (1.0 - (PI * u / p.rise).cos())
            } else {
                0.5 * (1.0 + (PI * (u - p.rise) / (p.period - p.rise)).cos())
            };
        }
        let c = p.foot + p.reflected;
        let lo = ((c - 5.0 * REFLECTED_SIGMA_S - t0) * fs).floor().max(0.0) as usize;
        let hi = (((c + 5.0 * REFLECTED_SIGMA_S - t0) * fs).ceil().max(0.0) as usize).min(n);
        for (i, v) in x.iter_mut().enumerate().take(hi).skip(lo) {
            *v += REFLECTED_AMPLITUDE * gauss(t0 + i as f64 / fs, c, REFLECTED_SIGMA_S);
        }
    }
    x
}

/// Bi-exponential skin conductance response starting at `onset`.
pub fn scr_pulse(t: f64, onset: f64, amplitude: f64, tau_rise: f64, tau_decay: f64) -> f64 {
    let u = t - onset;
    if u <= 0.0 {
        return 0.0;
    }
    // normalise so the peak equals `amplitude`
    let t_peak = (tau_decay / tau_rise).ln() * tau_rise * tau_decay / (tau_decay - tau_rise);
    let peak = (-t_peak / tau_decay).exp() - (-t_peak / tau_rise).exp();
    amplitude * ((-u / tau_decay).exp() - (-u / tau_rise).exp()) / peak
}

/// Beat times with a constant interval, starting at `first`.
pub fn regular_beats(first: f64, interval: f64, until: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = first;
    while t < until {
        out.push(t);
        t += interval;
    }
    out
}

/// Beat times cycling through `intervals`.
pub fn patterned_beats(first: f64, intervals: &[f64], until: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut t = first;
    let mut k = 0;
    while t < until {
        out.push(t);
        t += intervals[k % intervals.len()];
        k += 1;
    }
    out
}
