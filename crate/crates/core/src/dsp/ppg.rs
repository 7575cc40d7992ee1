//! Pulse-wave delineation: systolic peaks, feet and the reflected wave.

use super::{argmin, filter::Butterworth, spline_extremum, DspError};
use crate::data::SignalChannel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpgPulse {
    pub foot_s: f64,
    pub peak_s: f64,
    /// Reflected wave; NaN when no shoulder is found.
    pub reflected_s: f64,
    pub next_foot_s: f64,
}

impl PpgPulse {
    /// Pulse period, foot to foot.
    pub fn pp(&self) -> f64 {
        self.next_foot_s - self.foot_s
    }
    /// Rising time, foot to peak.
    pub fn prt(&self) -> f64 {
        self.peak_s - self.foot_s
    }
    /// Decreasing time, peak to next foot.
    pub fn pdt(&self) -> f64 {
        self.next_foot_s - self.peak_s
    }
    /// Width until the reflected wave.
    pub fn pw(&self) -> f64 {
        self.reflected_s - self.foot_s
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PpgPulses {
    pub pulses: Vec<PpgPulse>,
}

const BAND: (f64, f64) = (0.5, 8.0);
const MIN_BEAT_S: f64 = 0.33;
const FOOT_LP_HZ: f64 = 16.0;

fn snap_to_max(x: &[f64], i: usize, reach: usize) -> usize {
    let lo = i.saturating_sub(reach);
    let hi = (i + reach + 1).min(x.len());
    lo + super::argmax(&x[lo..hi])
}

pub fn delineate_ppg(ppg: &SignalChannel) -> Result<PpgPulses, DspError> {
    let fs = ppg.fs;
    let hi = BAND.1.min(0.45 * fs);
    let detect = Butterworth::bandpass(2, BAND.0, hi, fs)?.filtfilt(&ppg.samples)?;
    // Peaks are placed on the unsmoothed pulse: low-passing drags the skewed
    // peak towards its flatter side.
    let x = Butterworth::highpass(2, BAND.0, fs)?.filtfilt(&ppg.samples)?;
    let n = x.len();
    let peaks: Vec<usize> = systolic_peaks(&detect, (MIN_BEAT_S * fs) as usize)
        .into_iter()
        .map(|i| snap_to_max(&x, i, (0.05 * fs).ceil() as usize))
        .collect();
    if peaks.len() < 3 {
        return Err(DspError::NoPulses);
    }
    let at = |i: usize| ppg.time_of(i as f64);
    // The foot sits at the end of a flat decay, where sensor noise moves the
    // minimum; a mild low-pass steadies it at the cost of a small constant lag.
    let xs = if FOOT_LP_HZ < 0.45 * fs {
        Butterworth::lowpass(2, FOOT_LP_HZ, fs)?.filtfilt(&x)?
    } else {
        x.clone()
    };
    let foot_at = |i: usize| ppg.time_of(i as f64 + super::parabolic_offset(&xs, i));
    let peak_at = |i: usize| ppg.time_of(spline_extremum(&x, i, true));
    let feet: Vec<usize> = peaks.windows(2).map(|w| w[0] + argmin(&xs[w[0]..w[1]])).collect();

    let mut pulses = Vec::new();
    // feet[k] lies between peaks[k] and peaks[k + 1]
    for k in 0..feet.len().saturating_sub(1) {
        let (foot, peak, next_foot) = (feet[k], peaks[k + 1], feet[k + 1]);
        if !(foot < peak && peak < next_foot) || next_foot >= n {
            continue;
        }
        pulses.push(PpgPulse {
            foot_s: foot_at(foot),
            peak_s: peak_at(peak),
            reflected_s: reflected_wave(&x, peak, next_foot, fs).map_or(f64::NAN, at),
            next_foot_s: foot_at(next_foot),
        });
    }
    if pulses.is_empty() {
        return Err(DspError::NoPulses);
    }
    Ok(PpgPulses { pulses })
}

/// Local maxima at least `min_dist` apart (tallest first), keeping those
/// taller than 40% of the median peak height above the signal median.
fn systolic_peaks(x: &[f64], min_dist: usize) -> Vec<usize> {
    let n = x.len();
    let mut cands: Vec<usize> = (1..n.saturating_sub(1))
        .filter(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1])
        .collect();
    if cands.is_empty() {
        return cands;
    }
    cands.sort_by(|&a, &b| x[b].total_cmp(&x[a]).then(a.cmp(&b)));
    let mut taken = vec![false; n];
    let mut kept = Vec::new();
    for i in cands {
        let lo = i.saturating_sub(min_dist);
        let hi = (i + min_dist).min(n - 1);
        if !taken[lo..=hi].iter().any(|&t| t) {
            taken[i] = true;
            kept.push(i);
        }
    }
    kept.sort_unstable();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let baseline = sorted[n / 2];
    let mut heights: Vec<f64> = kept.iter().map(|&i| x[i] - baseline).collect();
    heights.sort_by(f64::total_cmp);
    let cut = 0.4 * heights[heights.len() / 2];
    if !(cut > 0.0) {
        return Vec::new();
    }
    kept.into_iter().filter(|&i| x[i] - baseline > cut).collect()
}

/// First local maximum after the systolic peak; failing that, the first
/// local maximum of the slope (the shoulder of a merged wave).
fn reflected_wave(x: &[f64], peak: usize, next_foot: usize, fs: f64) -> Option<usize> {
    let start = peak + ((0.05 * fs).ceil() as usize).max(1);
    let end = next_foot.saturating_sub(1);
    if start + 1 >= end {
        return None;
    }
    if let Some(i) = (start..end).find(|&i| x[i] > x[i - 1] && x[i] >= x[i + 1]) {
        return Some(i);
    }
    let slope = |i: usize| x[i + 1] - x[i - 1];
    (start + 1..end - 1).find(|&i| slope(i) > slope(i - 1) && slope(i) >= slope(i + 1) && slope(i) < 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Modality;
    use crate::synth::waveform::{ppg, PulseSpec};

    const FS: f64 = 64.0;

    fn train(periods: impl Fn(usize) -> f64, rise: f64, secs: f64) -> (SignalChannel, Vec<PulseSpec>) {
        let mut specs = Vec::new();
        let mut t = 0.3;
        let mut k = 0;
        while t < secs {
            let period = periods(k);
            specs.push(PulseSpec {
                foot: t,
                period,
                rise,
                reflected: rise + 0.25,
            });
            t += period;
            k += 1;
        }
        let n = (secs * FS) as usize;
        let ch = SignalChannel::new(Modality::Ppg, FS, 0.0, ppg(&specs, FS, 0.0, n)).unwrap();
        (ch, specs)
    }

    #[test]
    fn constant_pulses() {
        let (ch, _) = train(|_| 0.8, 0.15, 60.0);
        let p = delineate_ppg(&ch).unwrap();
        assert!(p.pulses.len() >= 70);
        for pulse in &p.pulses {
            assert!((pulse.pp() - 0.8).abs() <= 1.0 / FS, "{}", pulse.pp());
            assert!(pulse.foot_s < pulse.peak_s && pulse.peak_s < pulse.next_foot_s);
            assert!((pulse.pw() - 0.4).abs() <= 0.05, "{}", pulse.pw());
        }
        let n = p.pulses.len() as f64;
        let prt = p.pulses.iter().map(PpgPulse::prt).sum::<f64>() / n;
        let pdt = p.pulses.iter().map(PpgPulse::pdt).sum::<f64>() / n;
        assert!((prt - 0.15).abs() <= 0.015, "{prt}");
        assert!((pdt - 0.65).abs() <= 0.065, "{pdt}");
    }

    #[test]
    fn period_sweep_is_monotone() {
        let (ch, _) = train(|k| 0.7 + 0.01 * k as f64, 0.15, 16.0);
        let p = delineate_ppg(&ch).unwrap();
        let pp: Vec<f64> = p.pulses.iter().map(PpgPulse::pp).collect();
        assert!(pp.len() >= 15);
        for w in pp.windows(2) {
            assert!(w[1] >= w[0], "{w:?}");
        }
        assert!(pp[pp.len() - 1] > pp[0] + 0.1);
    }

    #[test]
    fn constant_signal_has_no_pulses() {
        let ch = SignalChannel::new(Modality::Ppg, FS, 0.0, vec![1.0; 64 * 30]).unwrap();
        assert_eq!(delineate_ppg(&ch).unwrap_err(), DspError::NoPulses);
    }
}
