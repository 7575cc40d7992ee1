//! Butterworth filters as cascaded second-order sections, applied forward
//! and backward so the output has zero phase.

use std::f64::consts::PI;

use super::DspError;
use crate::data::SignalChannel;

#[derive(Debug, Clone, Copy)]
struct Section {
    b: [f64; 3],
    a: [f64; 2],
}

impl Section {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct form II, state initialised to the steady state for
    /// a constant input `x0`. Returns the steady output level.
    fn run(&self, x: &mut [f64], x0: f64) -> f64 {
        let [b0, b1, b2] = self.b;
        let [a1, a2] = self.a;
        let h = self.dc_gain();
        let mut z1 = (h - b0) * x0;
        let mut z2 = (b2 - a2 * h) * x0;
        for v in x.iter_mut() {
            let xin = *v;
            let y = b0 * xin + z1;
            z1 = b1 * xin - a1 * y + z2;
            z2 = b2 * xin - a2 * y;
            *v = y;
        }
        h * x0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Low,
    High,
}

/// A digital Butterworth filter designed by the bilinear transform.
#[derive(Debug, Clone)]
pub struct Butterworth {
    sections: Vec<Section>,
    settle: usize,
}

fn design(kind: Kind, order: usize, cutoff: f64, fs: f64) -> Vec<Section> {
    let w0 = 2.0 * PI * cutoff / fs;
    let (sin, cos) = w0.sin_cos();
    let mut out = Vec::with_capacity(order.div_ceil(2));
    for k in 1..=order / 2 {
        let q = 1.0 / (2.0 * ((2 * k - 1) as f64 * PI / (2 * order) as f64).sin());
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b = match kind {
            Kind::Low => [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0],
            Kind::High => [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0],
        };
        out.push(Section {
            b: [b[0] / a0, b[1] / a0, b[2] / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        });
    }
    if order % 2 == 1 {
        let k = (w0 / 2.0).tan();
        let b = match kind {
            Kind::Low => [k / (1.0 + k), k / (1.0 + k), 0.0],
            Kind::High => [1.0 / (1.0 + k), -1.0 / (1.0 + k), 0.0],
        };
        out.push(Section {
            b,
            a: [(k - 1.0) / (k + 1.0), 0.0],
        });
    }
    out
}

fn settle_len(order: usize, f_min: f64, fs: f64) -> usize {
    (order as f64 * fs / (2.0 * PI * f_min)).ceil().max(1.0) as usize
}

impl Butterworth {
    pub fn lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Self, DspError> {
        Self::bandpass(order, 0.0, cutoff_hz, fs)
    }

    pub fn highpass(order: usize, cutoff_hz: f64, fs: f64) -> Result<Self, DspError> {
        check_band(cutoff_hz, fs / 2.0 * (1.0 - 1e-12), fs)?;
        Ok(Self {
            sections: design(Kind::High, order.max(1), cutoff_hz, fs),
            settle: settle_len(order.max(1), cutoff_hz, fs),
        })
    }

    /// Band `[lo, hi]`; `lo == 0` gives a pure low-pass.
    pub fn bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Result<Self, DspError> {
        check_band(lo_hz, hi_hz, fs)?;
        let order = order.max(1);
        let mut sections = Vec::new();
        let f_min = if lo_hz > 0.0 {
            sections.extend(design(Kind::High, order, lo_hz, fs));
            lo_hz
        } else {
            hi_hz
        };
        sections.extend(design(Kind::Low, order, hi_hz, fs));
        Ok(Self {
            sections,
            settle: settle_len(order, f_min, fs),
        })
    }

    /// Samples needed for the impulse response to die down.
    pub fn settle_len(&self) -> usize {
        self.settle
    }

    /// Forward-backward filtering with odd-reflection padding at both ends.
    pub fn filtfilt(&self, x: &[f64]) -> Result<Vec<f64>, DspError> {
        let n = x.len();
        let needed = 3 * self.settle;
        if n < needed {
            return Err(DspError::TooShort { needed, got: n });
        }
        let pad = needed.min(n - 1);
        let mut buf = Vec::with_capacity(n + 2 * pad);
        buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        buf.extend_from_slice(x);
        buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

        let run_all = |buf: &mut Vec<f64>| {
            let mut level = buf[0];
            for s in &self.sections {
                level = s.run(buf, level);
            }
        };
        run_all(&mut buf);
        buf.reverse();
        run_all(&mut buf);
        buf.reverse();
        Ok(buf[pad..pad + n].to_vec())
    }
}

fn check_band(lo: f64, hi: f64, fs: f64) -> Result<(), DspError> {
    let nyquist = fs / 2.0;
    if !(lo.is_finite() && hi.is_finite() && fs.is_finite()) || lo < 0.0 || lo >= hi || hi >= nyquist
    {
        return Err(DspError::InvalidBand { lo, hi, nyquist });
    }
    Ok(())
}

/// Zero-phase band-pass of a channel. `lo_hz == 0` means low-pass only.
pub fn bandpass(
    ch: &SignalChannel,
    lo_hz: f64,
    hi_hz: f64,
    order: usize,
) -> Result<SignalChannel, DspError> {
    let filt = Butterworth::bandpass(order, lo_hz, hi_hz, ch.fs)?;
    Ok(ch.with_samples(filt.filtfilt(&ch.samples)?))
}

pub fn lowpass(ch: &SignalChannel, cutoff_hz: f64, order: usize) -> Result<SignalChannel, DspError> {
    bandpass(ch, 0.0, cutoff_hz, order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Modality;

    fn sine(freq: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs) as usize)
            .map(|i| (2.0 * PI * freq * i as f64 / fs).sin())
            .collect()
    }

    fn central_amplitude(x: &[f64]) -> f64 {
        let a = x.len() / 5;
        x[a..x.len() - a].iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    #[test]
    fn drift_is_removed_from_ecg_band() {
        let fs = 256.0;
        let ch = SignalChannel::new(Modality::Ecg, fs, 0.0, sine(0.05, fs, 120.0)).unwrap();
        let out = bandpass(&ch, 0.5, 40.0, 2).unwrap();
        assert!(central_amplitude(&out.samples) < 0.05);
    }

    #[test]
    fn passband_amplitude_preserved() {
        let fs = 256.0;
        let ch = SignalChannel::new(Modality::Ecg, fs, 0.0, sine(10.0, fs, 20.0)).unwrap();
        let out = bandpass(&ch, 0.5, 40.0, 2).unwrap();
        let amp = central_amplitude(&out.samples);
        assert!((amp - 1.0).abs() < 0.02, "{amp}");
    }

    #[test]
    fn inverted_band_rejected() {
        let ch = SignalChannel::new(Modality::Ecg, 256.0, 0.0, vec![0.0; 4096]).unwrap();
        assert!(matches!(
            bandpass(&ch, 30.0, 20.0, 2),
            Err(DspError::InvalidBand { .. })
        ));
        assert!(bandpass(&ch, 0.5, 128.0, 2).is_err());
    }

    #[test]
    fn short_signal_rejected() {
        let ch = SignalChannel::new(Modality::Eda, 4.0, 0.0, vec![1.0; 20]).unwrap();
        assert!(matches!(lowpass(&ch, 0.05, 2), Err(DspError::TooShort { .. })));
    }

    #[test]
    fn constant_passes_lowpass_exactly() {
        let f = Butterworth::lowpass(3, 0.05, 4.0).unwrap();
        let y = f.filtfilt(&vec![2.0; 400]).unwrap();
        assert!(y.iter().all(|v| (v - 2.0).abs() < 1e-9));
    }

    #[test]
    fn odd_order_attenuates_at_cutoff() {
        // |H| at the cutoff is 1/sqrt(2) per pass, 1/2 after forward-backward.
        let fs = 100.0;
        let f = Butterworth::lowpass(3, 5.0, fs).unwrap();
        let y = f.filtfilt(&sine(5.0, fs, 40.0)).unwrap();
        let amp = central_amplitude(&y);
        assert!((amp - 0.5).abs() < 0.02, "{amp}");
    }
}
