//! Power spectral density estimation and band-power utilities.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("series too short: need {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("overlap fraction {0} outside [0, 1)")]
    InvalidOverlap(f64),
    #[error("invalid segment length {0} s")]
    InvalidSegment(f64),
    #[error("frequency grid is empty")]
    EmptyGrid,
    #[error("sample times must be strictly increasing")]
    NotIncreasing,
    #[error("times and values differ in length ({times} vs {values})")]
    LengthMismatch { times: usize, values: usize },
    #[error("invalid band [{lo}, {hi}] Hz")]
    InvalidBand { lo: f64, hi: f64 },
    #[error("band [{lo}, {hi}] Hz outside the estimate's grid [{min}, {max}] Hz")]
    BandOutOfRange { lo: f64, hi: f64, min: f64, max: f64 },
    #[error("no power in band [{lo}, {hi}] Hz")]
    ZeroPower { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PsdMethod {
    Welch,
    LombScargleWelch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsdEstimate {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
    pub method: PsdMethod,
    pub resolution_hz: f64,
}

/// A closed frequency interval in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    /// `n` equal-width bands covering `self`.
    pub fn split(self, n: usize) -> Vec<Band> {
        let w = (self.hi - self.lo) / n as f64;
        (0..n)
            .map(|k| Band::new(self.lo + k as f64 * w, if k + 1 == n { self.hi } else { self.lo + (k + 1) as f64 * w }))
            .collect()
    }
}

/// Periodic Hann window.
fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 * (1.0 - (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Welch's averaged periodogram: Hann window, per-segment mean removal and
/// one-sided density scaling so the PSD integrates to the signal variance.
pub fn welch_psd(x: &[f64], fs: f64, seg_len_s: f64, overlap: f64) -> Result<PsdEstimate, SpectralError> {
    if !(0.0..1.0).contains(&overlap) {
        return Err(SpectralError::InvalidOverlap(overlap));
    }
    let nperseg = (seg_len_s * fs).round();
    if !(nperseg >= 2.0) {
        return Err(SpectralError::InvalidSegment(seg_len_s));
    }
    let nperseg = nperseg as usize;
    if x.len() < nperseg {
        return Err(SpectralError::TooShort {
            needed: nperseg,
            got: x.len(),
        });
    }
    let step = (nperseg - (overlap * nperseg as f64).round() as usize).max(1);
    let window = hann(nperseg);
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(nperseg);
    let n_bins = nperseg / 2 + 1;
    let mut acc = vec![0.0; n_bins];
    let mut buf = vec![Complex::new(0.0, 0.0); nperseg];
    let mut segments = 0usize;
    let mut start = 0;
    while start + nperseg <= x.len() {
        let seg = &x[start..start + nperseg];
        let m = seg.iter().sum::<f64>() / nperseg as f64;
        for (b, (v, w)) in buf.iter_mut().zip(seg.iter().zip(&window)) {
            *b = Complex::new((v - m) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
        segments += 1;
        start += step;
    }
    let scale = 1.0 / (fs * wss * segments as f64);
    let power = acc
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let one_sided = if k == 0 || (nperseg % 2 == 0 && k == nperseg / 2) { 1.0 } else { 2.0 };
            a * scale * one_sided
        })
        .collect();
    let df = fs / nperseg as f64;
    Ok(PsdEstimate {
        freqs_hz: (0..n_bins).map(|k| k as f64 * df).collect(),
        power,
        method: PsdMethod::Welch,
        resolution_hz: df,
    })
}

/// Evenly spaced grid `lo, lo + step, ...` up to `hi` inclusive.
pub fn frequency_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

fn detrend_linear(t: &[f64], y: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = t.iter().map(|v| (v - tm) * (v - tm)).sum();
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    t.iter().zip(y).map(|(a, b)| b - ym - slope * (a - tm)).collect()
}

/// Lomb-Scargle periodogram with floating mean, scaled so a sinusoid of
/// amplitude `A` peaks at `A²/2`.
fn lomb_once(t: &[f64], y: &[f64], grid: &[f64]) -> Vec<f64> {
    let n = t.len() as f64;
    grid.iter()
        .map(|&f| {
            let w = 2.0 * PI * f;
            let (mut s2, mut c2) = (0.0, 0.0);
            for &ti in t {
                let (s, c) = (2.0 * w * ti).sin_cos();
                s2 += s;
                c2 += c;
            }
            let tau = s2.atan2(c2) / (2.0 * w);
            let (mut yc, mut ys, mut cc, mut ss) = (0.0, 0.0, 0.0, 0.0);
            for (&ti, &yi) in t.iter().zip(y) {
                let (s, c) = (w * (ti - tau)).sin_cos();
                yc += yi * c;
                ys += yi * s;
                cc += c * c;
                ss += s * s;
            }
            let eps = 1e-12 * n;
            let mut p = 0.0;
            if cc > eps {
                p += yc * yc / cc;
            }
            if ss > eps {
                p += ys * ys / ss;
            }
            p / n
        })
        .collect()
}

const LOMB_MIN_SAMPLES: usize = 8;

/// Lomb-Scargle PSD on an arbitrary grid. Each sub-window is linearly
/// detrended; when both halves of the record hold enough samples, the
/// periodograms of two half-overlapping sub-windows are averaged.
pub fn lomb_psd(times_s: &[f64], values: &[f64], freq_grid: &[f64]) -> Result<PsdEstimate, SpectralError> {
    if times_s.len() != values.len() {
        return Err(SpectralError::LengthMismatch {
            times: times_s.len(),
            values: values.len(),
        });
    }
    if times_s.len() < LOMB_MIN_SAMPLES {
        return Err(SpectralError::TooShort {
            needed: LOMB_MIN_SAMPLES,
            got: times_s.len(),
        });
    }
    if freq_grid.is_empty() {
        return Err(SpectralError::EmptyGrid);
    }
    if times_s.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(SpectralError::NotIncreasing);
    }
    let t_first = times_s[0];
    let span = times_s[times_s.len() - 1] - t_first;
    let sub_len = 2.0 * span / 3.0;
    let mut windows = Vec::new();
    for k in 0..2 {
        let a = t_first + k as f64 * sub_len / 2.0;
        let b = a + sub_len;
        let idx: Vec<usize> = (0..times_s.len())
            .filter(|&i| times_s[i] >= a - 1e-12 && times_s[i] <= b + 1e-12)
            .collect();
        windows.push(idx);
    }
    let parts: Vec<Vec<usize>> = if windows.iter().all(|w| w.len() >= LOMB_MIN_SAMPLES) {
        windows
    } else {
        vec![(0..times_s.len()).collect()]
    };
    let mut power = vec![0.0; freq_grid.len()];
    for idx in &parts {
        let t: Vec<f64> = idx.iter().map(|&i| times_s[i] - t_first).collect();
        let y: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let y = detrend_linear(&t, &y);
        for (p, v) in power.iter_mut().zip(lomb_once(&t, &y, freq_grid)) {
            *p += v / parts.len() as f64;
        }
    }
    let resolution_hz = if freq_grid.len() > 1 {
        freq_grid[1] - freq_grid[0]
    } else {
        0.0
    };
    Ok(PsdEstimate {
        freqs_hz: freq_grid.to_vec(),
        power,
        method: PsdMethod::LombScargleWelch,
        resolution_hz,
    })
}

fn check_band(psd: &PsdEstimate, band: Band) -> Result<(), SpectralError> {
    if !(band.lo.is_finite() && band.hi.is_finite()) || band.lo >= band.hi {
        return Err(SpectralError::InvalidBand {
            lo: band.lo,
            hi: band.hi,
        });
    }
    let (min, max) = match (psd.freqs_hz.first(), psd.freqs_hz.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ => return Err(SpectralError::EmptyGrid),
    };
    let tol = 1e-9 * max.abs().max(1.0);
    if band.lo < min - tol || band.hi > max + tol {
        return Err(SpectralError::BandOutOfRange {
            lo: band.lo,
            hi: band.hi,
            min,
            max,
        });
    }
    Ok(())
}

/// Integral over `[lo, hi]` of the piecewise-linear interpolant of `(f, g)`.
fn integrate(f: &[f64], g: &[f64], lo: f64, hi: f64) -> f64 {
    let mut total = 0.0;
    for k in 0..f.len().saturating_sub(1) {
        let (f0, f1) = (f[k], f[k + 1]);
        let a = lo.max(f0);
        let b = hi.min(f1);
        if b <= a {
            continue;
        }
        let interp = |x: f64| g[k] + (g[k + 1] - g[k]) * (x - f0) / (f1 - f0);
        total += 0.5 * (interp(a) + interp(b)) * (b - a);
    }
    total
}

/// Trapezoidal power in `band`.
pub fn band_power(psd: &PsdEstimate, band: Band) -> Result<f64, SpectralError> {
    check_band(psd, band)?;
    Ok(integrate(&psd.freqs_hz, &psd.power, band.lo, band.hi))
}

/// Power in `band` divided by the power in `total`. NaN when `total` holds no power.
pub fn normalized_band_power(psd: &PsdEstimate, band: Band, total: Band) -> Result<f64, SpectralError> {
    let num = band_power(psd, band)?;
    let den = band_power(psd, total)?;
    Ok(if den > 0.0 { num / den } else { f64::NAN })
}

/// Integral over the whole grid.
pub fn total_power(psd: &PsdEstimate) -> f64 {
    match (psd.freqs_hz.first(), psd.freqs_hz.last()) {
        (Some(&a), Some(&b)) if b > a => integrate(&psd.freqs_hz, &psd.power, a, b),
        _ => 0.0,
    }
}

/// Mean of a single Gaussian fitted to the PSD over `band` by power-weighted
/// moments: `∫f·p df / ∫p df`.
pub fn gaussian_peak_fit(psd: &PsdEstimate, band: Band) -> Result<f64, SpectralError> {
    check_band(psd, band)?;
    let positive = psd
        .freqs_hz
        .iter()
        .zip(&psd.power)
        .filter(|(f, p)| **f >= band.lo && **f <= band.hi && **p > 0.0)
        .count();
    let zero = SpectralError::ZeroPower {
        lo: band.lo,
        hi: band.hi,
    };
    if positive < 3 {
        return Err(zero);
    }
    let weighted: Vec<f64> = psd.freqs_hz.iter().zip(&psd.power).map(|(f, p)| f * p).collect();
    let den = integrate(&psd.freqs_hz, &psd.power, band.lo, band.hi);
    if !(den > 0.0) {
        return Err(zero);
    }
    let num = integrate(&psd.freqs_hz, &weighted, band.lo, band.hi);
    Ok((num / den).clamp(band.lo, band.hi))
}

/// Frequency of the largest grid value inside `band`.
pub fn peak_frequency(psd: &PsdEstimate, band: Band) -> Option<f64> {
    psd.freqs_hz
        .iter()
        .zip(&psd.power)
        .filter(|(f, _)| **f >= band.lo && **f <= band.hi)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(f, _)| *f)
}

/// Linear interpolation of an event series onto a uniform grid at `fs`
/// spanning `[times[0], times[last]]`.
pub fn resample_uniform(times: &[f64], values: &[f64], fs: f64) -> Vec<f64> {
    if times.len() < 2 {
        return values.to_vec();
    }
    let t0 = times[0];
    let n = ((times[times.len() - 1] - t0) * fs + 1e-9).floor() as usize + 1;
    let mut out = Vec::with_capacity(n);
    let mut k = 0;
    for i in 0..n {
        let t = t0 + i as f64 / fs;
        while k + 2 < times.len() && times[k + 1] < t {
            k += 1;
        }
        let (ta, tb) = (times[k], times[k + 1]);
        let frac = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        out.push(values[k] + frac * (values[k + 1] - values[k]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    fn sine(freq: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn noise(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn welch_sinusoid_peak() {
        let psd = welch_psd(&sine(0.3, 4.0, 300.0), 4.0, 60.0, 0.5).unwrap();
        let f = peak_frequency(&psd, Band::new(0.0, 2.0)).unwrap();
        assert!((f - 0.3).abs() <= psd.resolution_hz, "{f}");
    }

    #[test]
    fn welch_white_noise_parseval() {
        let x = noise(11, 64 * 600);
        let psd = welch_psd(&x, 64.0, 30.0, 0.5).unwrap();
        let total = total_power(&psd);
        assert!((total - 1.0).abs() < 0.1, "{total}");
    }

    #[test]
    fn welch_constant_has_no_power() {
        let psd = welch_psd(&[3.0; 400], 4.0, 30.0, 0.5).unwrap();
        assert!(psd.power.iter().all(|p| *p == 0.0));
        assert_eq!(total_power(&psd), 0.0);
    }

    #[test]
    fn welch_rejects_short_series() {
        assert!(matches!(
            welch_psd(&[1.0; 10], 4.0, 30.0, 0.5),
            Err(SpectralError::TooShort { .. })
        ));
        assert!(welch_psd(&[1.0; 200], 4.0, 30.0, 1.0).is_err());
    }

    #[test]
    fn lomb_finds_jittered_sinusoid() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut t = 0.0;
        let mut times = Vec::new();
        while t < 120.0 {
            times.push(t);
            t += 0.5 + 0.4 * rand::Rng::random::<f64>(&mut rng);
        }
        let values: Vec<f64> = times.iter().map(|t| (2.0 * PI * 0.25 * t).sin()).collect();
        let grid = frequency_grid(0.05, 1.0, 0.005);
        let psd = lomb_psd(&times, &values, &grid).unwrap();
        let f = peak_frequency(&psd, Band::new(0.05, 1.0)).unwrap();
        assert!((f - 0.25).abs() <= 0.005 + 1e-12, "{f}");
        let peak = psd.power.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.5).abs() < 0.05, "{peak}");
    }

    #[test]
    fn lomb_ignores_linear_trend() {
        let times: Vec<f64> = (0..60).map(|i| i as f64 * 0.7).collect();
        let values: Vec<f64> = times.iter().map(|t| 3.0 + 0.2 * t).collect();
        let grid = frequency_grid(0.08, 0.6, 0.005);
        let psd = lomb_psd(&times, &values, &grid).unwrap();
        assert!(psd.power.iter().all(|p| *p < 1e-20));
    }

    #[test]
    fn lomb_rejects_small_or_empty_input() {
        let t = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert!(matches!(lomb_psd(&t, &t, &[0.1]), Err(SpectralError::TooShort { .. })));
        let t: Vec<f64> = (0..10).map(f64::from).collect();
        assert_eq!(lomb_psd(&t, &t, &[]), Err(SpectralError::EmptyGrid));
    }

    #[test]
    fn band_power_normalization() {
        let psd = PsdEstimate {
            freqs_hz: frequency_grid(0.0, 1.0, 0.01),
            power: frequency_grid(0.0, 1.0, 0.01).iter().map(|f| if *f <= 0.5 { 1.0 } else { 0.0 }).collect(),
            method: PsdMethod::Welch,
            resolution_hz: 0.01,
        };
        let full = normalized_band_power(&psd, Band::new(0.0, 0.6), Band::new(0.0, 1.0)).unwrap();
        assert!((full - 1.0).abs() < 1e-12);
        assert_eq!(band_power(&psd, Band::new(0.6, 1.0)).unwrap(), 0.0);
        assert!(band_power(&psd, Band::new(0.5, 0.4)).is_err());
        assert!(band_power(&psd, Band::new(0.5, 1.4)).is_err());
    }

    #[test]
    fn sinusoid_band_ratio() {
        let psd = welch_psd(&sine(0.3, 4.0, 120.0), 4.0, 30.0, 0.5).unwrap();
        let inside = band_power(&psd, Band::new(0.25, 0.5)).unwrap();
        let below = band_power(&psd, Band::new(0.0, 0.25)).unwrap();
        assert!(inside > 10.0 * below);
    }

    #[test]
    fn gaussian_fit_cases() {
        let grid = frequency_grid(0.0, 1.0, 1.0 / 30.0);
        let uniform = PsdEstimate {
            power: vec![1.0; grid.len()],
            freqs_hz: grid.clone(),
            method: PsdMethod::Welch,
            resolution_hz: 1.0 / 30.0,
        };
        let mid = gaussian_peak_fit(&uniform, Band::new(0.15, 0.5)).unwrap();
        assert!((mid - 0.325).abs() < 1e-12, "{mid}");

        let fine = frequency_grid(0.0, 1.0, 0.005);
        let peaked = PsdEstimate {
            power: fine.iter().map(|f| (-((f - 0.3) / 0.02).powi(2) / 2.0).exp()).collect(),
            freqs_hz: fine,
            method: PsdMethod::Welch,
            resolution_hz: 0.005,
        };
        let m = gaussian_peak_fit(&peaked, Band::new(0.15, 0.5)).unwrap();
        assert!((m - 0.3).abs() <= 0.005, "{m}");

        let zero = PsdEstimate {
            power: vec![0.0; grid.len()],
            ..uniform
        };
        assert!(matches!(
            gaussian_peak_fit(&zero, Band::new(0.15, 0.5)),
            Err(SpectralError::ZeroPower { .. })
        ));
    }

    #[test]
    fn resample_is_linear() {
        let y = resample_uniform(&[0.0, 1.0, 3.0], &[0.0, 1.0, 5.0], 2.0);
        assert_eq!(y, vec![0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    proptest! {
        #[test]
        fn welch_nonnegative_and_scale_equivariant(seed in 0u64..1000, alpha in 0.01f64..100.0) {
            let x = noise(seed, 512);
            let base = welch_psd(&x, 8.0, 16.0, 0.5).unwrap();
            prop_assert!(base.power.iter().all(|p| *p >= 0.0));
            let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
            let s = welch_psd(&scaled, 8.0, 16.0, 0.5).unwrap();
            for (a, b) in base.power.iter().zip(&s.power) {
                let want = alpha * alpha * a;
                prop_assert!((b - want).abs() <= 1e-9 * want.abs().max(1e-300));
            }
        }

        #[test]
        fn partition_sums_to_one(seed in 0u64..1000, parts in 1usize..8) {
            let x = noise(seed, 400);
            let psd = welch_psd(&x, 4.0, 30.0, 0.5).unwrap();
            let total = Band::new(0.003, 0.4);
            let sum: f64 = total.split(parts).into_iter()
                .map(|b| normalized_band_power(&psd, b, total).unwrap())
                .sum();
            prop_assert!((sum - 1.0).abs() < 1e-6);
        }
    }
}
