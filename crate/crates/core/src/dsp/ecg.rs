//! QRS detection: band-pass, derivative, squaring and moving-window
//! integration followed by adaptive signal/noise thresholds with search-back.

use super::{argmax, filter::Butterworth, parabolic_offset, variance, DspError};
use crate::data::SignalChannel;

/// RR intervals outside this range are flagged as implausible.
pub const RR_PLAUSIBLE_S: (f64, f64) = (0.3, 2.0);

const REFRACTORY_S: f64 = 0.2;
const INTEGRATION_S: f64 = 0.15;
const LOCALIZE_S: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RRSeries {
    pub peak_times_s: Vec<f64>,
    /// `rr_s[i] = peak_times_s[i + 1] - peak_times_s[i]`.
    pub rr_s: Vec<f64>,
    pub implausible: Vec<bool>,
}

impl RRSeries {
    pub fn from_peaks(peak_times_s: Vec<f64>) -> Self {
        let rr_s: Vec<f64> = peak_times_s.windows(2).map(|w| w[1] - w[0]).collect();
        let implausible = rr_s
            .iter()
            .map(|&rr| rr < RR_PLAUSIBLE_S.0 || rr > RR_PLAUSIBLE_S.1)
            .collect();
        Self {
            peak_times_s,
            rr_s,
            implausible,
        }
    }

    /// Interval `i` ends at `peak_times_s[i + 1]`.
    pub fn interval_end(&self, i: usize) -> f64 {
        self.peak_times_s[i + 1]
    }
}

struct Thresholds {
    spki: f64,
    npki: f64,
}

impl Thresholds {
    fn primary(&self) -> f64 {
        self.npki + 0.25 * (self.spki - self.npki)
    }
}

pub fn detect_r_peaks(ecg: &SignalChannel) -> Result<RRSeries, DspError> {
    let fs = ecg.fs;
    if fs < 128.0 {
        return Err(DspError::RateTooLow { fs, min: 128.0 });
    }
    if ecg.duration_s() < 10.0 {
        return Err(DspError::RecordTooShort {
            got: ecg.duration_s(),
            min: 10.0,
        });
    }
    let raw = &ecg.samples;
    let scale = raw.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || variance(raw) <= 1e-24 * scale * scale {
        return Err(DspError::NoQrs);
    }

    let clean = Butterworth::bandpass(2, 0.5, 40.0, fs)?.filtfilt(raw)?;
    let qrs = Butterworth::bandpass(2, 5.0, 15.0, fs)?.filtfilt(raw)?;
    let n = qrs.len();
    let mut energy = vec![0.0; n];
    for i in 1..n - 1 {
        let d = (qrs[i + 1] - qrs[i - 1]) * fs / 2.0;
        energy[i] = d * d;
    }
    let mwi = centered_mean(&energy, ((INTEGRATION_S * fs).round() as usize) | 1);

    let candidates: Vec<usize> = (1..n - 1)
        .filter(|&i| mwi[i] > mwi[i - 1] && mwi[i] >= mwi[i + 1])
        .collect();
    let training = ((2.0 * fs) as usize).min(n);
    let init_max = mwi[..training].iter().fold(0.0f64, |m, &v| m.max(v));
    if init_max <= 0.0 && candidates.is_empty() {
        return Err(DspError::NoQrs);
    }
    let mut th = Thresholds {
        spki: 0.25 * init_max,
        npki: 0.5 * mwi[..training].iter().sum::<f64>() / training as f64,
    };

    let refractory = (REFRACTORY_S * fs) as usize;
    let mut qrs_idx: Vec<usize> = Vec::new();
    let mut noise_since_last: Vec<usize> = Vec::new();
    for &c in &candidates {
        let peak = mwi[c];
        if let Some(&last) = qrs_idx.last() {
            if c - last < refractory {
                if peak > mwi[last] {
                    *qrs_idx.last_mut().unwrap() = c;
                }
                continue;
            }
            // search back for a missed beat when the gap is unusually long
            if qrs_idx.len() >= 2 {
                let recent = &qrs_idx[qrs_idx.len().saturating_sub(9)..];
                let rr_avg = (recent[recent.len() - 1] - recent[0]) as f64 / (recent.len() - 1) as f64;
                if (c - last) as f64 > 1.66 * rr_avg {
                    let secondary = 0.5 * th.primary();
                    let missed = noise_since_last
                        .iter()
                        .copied()
                        .filter(|&k| k - last >= refractory && c - k >= refractory && mwi[k] > secondary)
                        .max_by(|&a, &b| mwi[a].total_cmp(&mwi[b]));
                    if let Some(k) = missed {
                        qrs_idx.push(k);
                        th.spki = 0.25 * mwi[k] + 0.75 * th.spki;
                    }
                }
            }
        }
        if peak > th.primary() {
            qrs_idx.push(c);
            th.spki = 0.125 * peak + 0.875 * th.spki;
            noise_since_last.clear();
        } else {
            th.npki = 0.125 * peak + 0.875 * th.npki;
            noise_since_last.push(c);
        }
    }
    if qrs_idx.is_empty() {
        return Err(DspError::NoQrs);
    }

    let half = (LOCALIZE_S * fs) as usize;
    let mut peaks: Vec<(usize, f64)> = Vec::with_capacity(qrs_idx.len());
    for &c in &qrs_idx {
        let lo = c.saturating_sub(half);
        let hi = (c + half + 1).min(n);
        let i = lo + argmax(&clean[lo..hi]);
        match peaks.last_mut() {
            Some(prev) if i - prev.0 < refractory => {
                if clean[i] > clean[prev.0] {
                    *prev = (i, clean[i]);
                }
            }
            Some(prev) if i <= prev.0 => {}
            _ => peaks.push((i, clean[i])),
        }
    }
    let times = peaks
        .iter()
        .map(|&(i, _)| ecg.time_of(i as f64 + parabolic_offset(&clean, i)))
        .collect();
    Ok(RRSeries::from_peaks(times))
}

/// Centered moving average with an odd window, shrinking at the edges.
fn centered_mean(x: &[f64], width: usize) -> Vec<f64> {
    let n = x.len();
    let h = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for v in x {
        prefix.push(prefix.last().unwrap() + v);
    }
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(h);
            let b = (i + h + 1).min(n);
            (prefix[b] - prefix[a]) / (b - a) as f64
        })
        .collect()
}
