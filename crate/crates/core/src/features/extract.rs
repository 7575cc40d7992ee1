//! Per-window feature extraction for each modality.

use crate::data::{Modality, SignalChannel};
use crate::dsp::{EdaComponents, PpgPulses, RRSeries, RespCycles};
use crate::spectral::{
    band_power, frequency_grid, gaussian_peak_fit, lomb_psd, normalized_band_power, peak_frequency,
    resample_uniform, total_power, welch_psd, Band, PsdEstimate,
};
use crate::stats::{linear_slope, mean, median, population_std, population_variance};

use super::registry::{PPG_PARAMS, RSP_PARAMS, STATS};
use super::{FeatureError, Window};

/// Named values produced by one extractor.
pub type Partial = Vec<(String, f64)>;

pub const WELCH_MAX_SEG_S: f64 = 30.0;
pub const WELCH_OVERLAP: f64 = 0.5;
pub const INTERVAL_RESAMPLE_HZ: f64 = 4.0;

pub const RSP_TOTAL: Band = Band::new(0.0, 1.0);
pub const RSP_FINE: Band = Band::new(0.08, 0.6);
pub const RSP_HF: Band = Band::new(0.15, 0.5);
pub const RSP_LOMB_GRID: (f64, f64, f64) = (0.05, 1.0, 0.005);

pub const VLF: Band = Band::new(0.003, 0.04);
pub const LF: Band = Band::new(0.04, 0.15);
pub const HF: Band = Band::new(0.15, 0.4);
pub const INTERVAL_TOTAL: Band = Band::new(0.003, 0.4);

const MIN_INTERVALS: usize = 3;

fn window_samples<'a>(win: &Window, ch: &'a SignalChannel) -> Result<&'a [f64], FeatureError> {
    ch.range_for(win.start_s, win.end_s())
        .filter(|r| r.len() >= 2)
        .map(|r| &ch.samples[r])
        .ok_or(FeatureError::OutsideChannel {
            modality: ch.modality,
            start_s: win.start_s,
            end_s: win.end_s(),
        })
}

fn welch_window(x: &[f64], fs: f64) -> Option<PsdEstimate> {
    let seg = (x.len() as f64 / fs).min(WELCH_MAX_SEG_S);
    welch_psd(x, fs, seg, WELCH_OVERLAP).ok()
}

fn slope_of(x: &[f64], fs: f64) -> f64 {
    let t: Vec<f64> = (0..x.len()).map(|i| i as f64 / fs).collect();
    linear_slope(&t, x)
}

fn stats3(prefix: &str, values: &[f64]) -> Partial {
    let v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    let (m, med, sd) = if v.is_empty() {
        (f64::NAN, f64::NAN, f64::NAN)
    } else {
        (mean(&v), median(&v), population_std(&v))
    };
    STATS
        .iter()
        .zip([m, med, sd])
        .map(|(s, val)| (format!("{prefix}_{s}"), val))
        .collect()
}

fn nan_partial(names: impl IntoIterator<Item = String>) -> Partial {
    names.into_iter().map(|n| (n, f64::NAN)).collect()
}

pub fn extract_skt_features(win: &Window, skt: &SignalChannel) -> Result<Partial, FeatureError> {
    let x = window_samples(win, skt)?;
    let power = welch_window(x, skt.fs).map_or(f64::NAN, |p| total_power(&p));
    Ok(vec![
        ("SKT_gradient".into(), slope_of(x, skt.fs)),
        ("SKT_power".into(), power),
    ])
}

pub fn extract_eda_features(win: &Window, eda: &EdaComponents) -> Result<Partial, FeatureError> {
    let ch = SignalChannel {
        modality: Modality::Eda,
        fs: eda.fs,
        t0: eda.t0,
        samples: Vec::new(),
    };
    let outside = FeatureError::OutsideChannel {
        modality: Modality::Eda,
        start_s: win.start_s,
        end_s: win.end_s(),
    };
    let a = ch.index_at(win.start_s);
    let b = ch.index_at(win.end_s());
    if a < 0 || b as usize > eda.scl.len() || b - a < 2 {
        return Err(outside);
    }
    let r = a as usize..b as usize;
    let scl = &eda.scl[r.clone()];
    let scr = &eda.scr[r];
    Ok(vec![
        ("SCL_gradient".into(), slope_of(scl, eda.fs)),
        ("SCL_mean".into(), mean(scl)),
        ("SCR_power".into(), scr.iter().map(|v| v * v).sum::<f64>() / scr.len() as f64),
    ])
}

fn rsp_time_names() -> Vec<String> {
    let mut names = Vec::new();
    for (param, _) in RSP_PARAMS {
        for s in STATS {
            names.push(if param.starts_with("RSP_") {
                format!("{param}_{s}")
            } else {
                format!("RSP_{param}_{s}")
            });
        }
    }
    names
}

/// `rsp_band` is the band-limited respiration of the whole session.
pub fn extract_rsp_features(
    win: &Window,
    cycles: &RespCycles,
    rsp_band: &SignalChannel,
) -> Result<Partial, FeatureError> {
    let x = window_samples(win, rsp_band)?;
    let fs = rsp_band.fs;
    let mut out = Partial::new();

    let breaths: Vec<_> = cycles
        .breaths
        .iter()
        .filter(|b| b.onset_s >= win.start_s && b.onset_s < win.end_s())
        .collect();
    if breaths.len() < 2 {
        out.extend(nan_partial(rsp_time_names()));
    } else {
        let series: [Vec<f64>; 4] = [
            breaths.iter().map(|b| b.rate()).collect(),
            breaths.iter().map(|b| b.period()).collect(),
            breaths.iter().map(|b| b.insp_time()).collect(),
            breaths.iter().map(|b| b.exp_time()).collect(),
        ];
        let names = rsp_time_names();
        for (k, values) in series.iter().enumerate() {
            let prefix = names[3 * k].trim_end_matches("_mean");
            out.extend(stats3(prefix, values));
        }
    }

    let psd = welch_window(x, fs);
    let quarters = RSP_TOTAL.split(4);
    let fine = RSP_FINE.split(5);
    match psd.filter(|p| p.freqs_hz.last().is_some_and(|f| *f >= RSP_TOTAL.hi)) {
        Some(p) => {
            for (k, b) in quarters.iter().enumerate() {
                out.push((format!("RSP_PSD_{}", k + 1), band_power(&p, *b).unwrap_or(f64::NAN)));
            }
            for (k, b) in quarters.iter().enumerate() {
                let v = normalized_band_power(&p, *b, RSP_TOTAL).unwrap_or(f64::NAN);
                out.push((format!("RSP_nPSD_{}", k + 1), v));
            }
            for (k, b) in fine.iter().enumerate() {
                let v = normalized_band_power(&p, *b, RSP_TOTAL).unwrap_or(f64::NAN);
                out.push((format!("RSP_pBF_{}", k + 1), v));
            }
            out.push(("RSP_F1pond".into(), gaussian_peak_fit(&p, RSP_HF).unwrap_or(f64::NAN)));
        }
        None => {
            out.extend(nan_partial((1..=4).map(|k| format!("RSP_PSD_{k}"))));
            out.extend(nan_partial((1..=4).map(|k| format!("RSP_nPSD_{k}"))));
            out.extend(nan_partial((1..=5).map(|k| format!("RSP_pBF_{k}"))));
            out.push(("RSP_F1pond".into(), f64::NAN));
        }
    }
    out.push(("RSP_Pk".into(), lomb_peak(x, fs)));
    out.push(("RSP_power".into(), x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64));
    Ok(out)
}

/// Peak of the Lomb periodogram of the respiration decimated to about 4 Hz.
fn lomb_peak(x: &[f64], fs: f64) -> f64 {
    let step = ((fs / INTERVAL_RESAMPLE_HZ).floor() as usize).max(1);
    let times: Vec<f64> = (0..x.len()).step_by(step).map(|i| i as f64 / fs).collect();
    let values: Vec<f64> = x.iter().step_by(step).copied().collect();
    let (lo, hi, df) = RSP_LOMB_GRID;
    let grid = frequency_grid(lo, hi, df);
    match lomb_psd(&times, &values, &grid) {
        Ok(p) if p.power.iter().any(|v| *v > 0.0) => peak_frequency(&p, Band::new(lo, hi)).unwrap_or(f64::NAN),
        _ => f64::NAN,
    }
}

/// Normalized VLF/LF/HF powers of an interval series resampled to 4 Hz.
fn interval_bands(times: &[f64], intervals: &[f64]) -> [f64; 3] {
    let nan = [f64::NAN; 3];
    let y = resample_uniform(times, intervals, INTERVAL_RESAMPLE_HZ);
    if y.len() < 8 {
        return nan;
    }
    let Some(psd) = welch_window(&y, INTERVAL_RESAMPLE_HZ) else {
        return nan;
    };
    let mut out = nan;
    for (o, b) in out.iter_mut().zip([VLF, LF, HF]) {
        *o = normalized_band_power(&psd, b, INTERVAL_TOTAL).unwrap_or(f64::NAN);
    }
    out
}

/// Poincaré descriptors `(T, L, CSI, CSI_modified)` with population variances.
/// Spreads below 1e-9 of the mean interval count as zero.
pub fn poincare(rr: &[f64]) -> (f64, f64, f64, f64) {
    let diff: Vec<f64> = rr.windows(2).map(|w| w[1] - w[0]).collect();
    let vd = population_variance(&diff);
    let floor = 1e-9 * mean(rr).abs();
    let clean = |sd: f64| if sd <= floor { 0.0 } else { sd };
    let sd1 = clean((0.5 * vd).sqrt());
    let sd2 = clean((2.0 * population_variance(rr) - 0.5 * vd).max(0.0).sqrt());
    let (t, l) = (4.0 * sd1, 4.0 * sd2);
    if t > 0.0 {
        (t, l, l / t, l * l / t)
    } else {
        (t, l, f64::NAN, f64::NAN)
    }
}

const ECG_NAMES: [&str; 10] = [
    "ECG_RR_mean",
    "ECG_RR_median",
    "ECG_RR_SDNN",
    "ECG_RR_nVLF",
    "ECG_RR_nLF",
    "ECG_RR_nHF",
    "ECG_RR_T",
    "ECG_RR_L",
    "ECG_RR_CSI",
    "ECG_RR_CSI_modified",
];

/// Uses plausible intervals with both beats inside the window.
pub fn extract_ecg_features(win: &Window, rr: &RRSeries) -> Result<Partial, FeatureError> {
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, &v) in rr.rr_s.iter().enumerate() {
        let (a, b) = (rr.peak_times_s[i], rr.interval_end(i));
        if a >= win.start_s && b < win.end_s() && !rr.implausible[i] {
            times.push(b);
            values.push(v);
        }
    }
    if values.len() < MIN_INTERVALS {
        return Ok(nan_partial(ECG_NAMES.iter().map(|s| s.to_string())));
    }
    let bands = interval_bands(&times, &values);
    let (t, l, csi, csim) = poincare(&values);
    let vals = [
        mean(&values),
        median(&values),
        population_std(&values),
        bands[0],
        bands[1],
        bands[2],
        t,
        l,
        csi,
        csim,
    ];
    Ok(ECG_NAMES.iter().map(|s| s.to_string()).zip(vals).collect())
}

fn ppg_names() -> Vec<String> {
    let mut names = Vec::new();
    for p in PPG_PARAMS {
        for s in STATS {
            names.push(format!("{p}_{s}"));
        }
    }
    for b in ["nVLF", "nLF", "nHF"] {
        names.push(format!("PPG_PP_{b}"));
    }
    names
}

/// Uses pulses whose foot-to-foot span lies inside the window.
pub fn extract_ppg_features(win: &Window, pulses: &PpgPulses) -> Result<Partial, FeatureError> {
    let inside: Vec<_> = pulses
        .pulses
        .iter()
        .filter(|p| p.foot_s >= win.start_s && p.next_foot_s < win.end_s())
        .collect();
    if inside.len() < MIN_INTERVALS {
        return Ok(nan_partial(ppg_names()));
    }
    let mut out = Partial::new();
    let series: [Vec<f64>; 4] = [
        inside.iter().map(|p| p.pp()).collect(),
        inside.iter().map(|p| p.prt()).collect(),
        inside.iter().map(|p| p.pdt()).collect(),
        inside.iter().map(|p| p.pw()).collect(),
    ];
    for (param, values) in PPG_PARAMS.iter().zip(&series) {
        out.extend(stats3(param, values));
    }
    let times: Vec<f64> = inside.iter().map(|p| p.next_foot_s).collect();
    let bands = interval_bands(&times, &series[0]);
    for (b, v) in ["nVLF", "nLF", "nHF"].iter().zip(bands) {
        out.push((format!("PPG_PP_{b}"), v));
    }
    Ok(out)
}
