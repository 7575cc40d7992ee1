//! Seeded synthetic sessions with known physiology and time perception.

mod profile;
pub mod waveform;

pub use profile::{scenario_profiles, PhysioProfile, ProfileMap, Scenario, PAPER_T_REL};

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    DataError, Modality, ProtocolTemplate, SegmentClass, Session, SignalChannel, PERCEIVED_MAX_S,
    PERCEIVED_STEP_S,
};
use crate::rng::{derive_seed, stream, StreamRng};
use waveform::{BreathSpec, PulseSpec};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("no profile for segment class {0:?}")]
    MissingProfile(SegmentClass),
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Lead-in and lead-out recorded around the protocol.
pub const PAD_S: f64 = 5.0;
pub const LF_HZ: f64 = 0.1;
pub const SCR_TAU_RISE_S: f64 = 0.75;
pub const SCR_TAU_DECAY_S: f64 = 2.0;

/// Snap a duration to the questionnaire grid.
pub fn quantize_perceived(t: f64) -> f64 {
    ((t / PERCEIVED_STEP_S).round() * PERCEIVED_STEP_S).clamp(0.0, PERCEIVED_MAX_S)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentTruth {
    pub index: u8,
    pub class: SegmentClass,
    pub start_s: f64,
    pub end_s: f64,
    pub profile: PhysioProfile,
    /// t_rel drawn before quantization of the answer.
    pub t_rel_planted: f64,
    pub t_perceived_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub subject_id: String,
    pub seed: u64,
    pub segments: Vec<SegmentTruth>,
    pub beat_times_s: Vec<f64>,
    pub breaths: Vec<BreathSpec>,
    pub pulses: Vec<PulseSpec>,
    pub scr_onsets_s: Vec<f64>,
}

/// What the generator fixed for a feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Planted(f64),
    /// Not controlled by the generator.
    Free,
}

impl GroundTruth {
    pub fn segment(&self, index: u8) -> Option<&SegmentTruth> {
        self.segments.iter().find(|s| s.index == index)
    }

    /// Planted value of a registry feature in a segment. `None` for unknown
    /// features or segments.
    pub fn target_for(&self, feature: &str, segment_index: u8) -> Option<Target> {
        crate::features::feature_index(feature)?;
        let p = &self.segment(segment_index)?.profile;
        let rate = p.resp_rate_hz;
        let planted = match feature {
            "SKT_gradient" => p.skt_slope,
            "SCL_gradient" => p.scl_slope_us_per_s,
            "RSP_Rate_mean" | "RSP_Rate_median" => 60.0 * rate,
            "RSP_Prd_mean" | "RSP_Prd_median" => 1.0 / rate,
            "RSP_InspTime_mean" | "RSP_InspTime_median" => p.insp_frac / rate,
            "RSP_ExpTime_mean" | "RSP_ExpTime_median" => (1.0 - p.insp_frac) / rate,
            "RSP_Pk" => rate,
            "ECG_RR_mean" | "ECG_RR_median" | "PPG_PP_mean" | "PPG_PP_median" => p.rr_mean_s,
            "ECG_RR_SDNN" => p.rr_sdnn_s,
            "PPG_PRT_mean" => p.ppg_rise_frac * p.rr_mean_s,
            "PPG_PDT_mean" => (1.0 - p.ppg_rise_frac) * p.rr_mean_s,
            "PPG_PW_mean" => p.ppg_reflect_frac * p.rr_mean_s,
            _ => return Some(Target::Free),
        };
        Some(Target::Planted(planted))
    }
}

struct Timeline<'a> {
    segments: &'a [SegmentTruth],
}

impl Timeline<'_> {
    fn at(&self, t: f64) -> &SegmentTruth {
        self.segments
            .iter()
            .find(|s| t < s.end_s)
            .unwrap_or_else(|| &self.segments[self.segments.len() - 1])
    }
}

fn noisy(mut x: Vec<f64>, sd: impl Fn(usize) -> f64, rng: &mut StreamRng) -> Vec<f64> {
    for (i, v) in x.iter_mut().enumerate() {
        let z: f64 = StandardNormal.sample(rng);
        *v += sd(i) * z;
    }
    x
}

fn beats(tl: &Timeline, total: f64, rng: &mut StreamRng) -> Vec<f64> {
    let phase_lf = rng.random::<f64>() * 2.0 * PI;
    let phase_hf = rng.random::<f64>() * 2.0 * PI;
    let mut out = Vec::new();
    let mut t = 0.2 + 0.3 * rng.random::<f64>();
    while t < total {
        out.push(t);
        let p = &tl.at(t).profile;
        // LF and HF sinusoids sharing the variance sdnn² in ratio lf_hf
        let a_hf = p.rr_sdnn_s * (2.0 / (1.0 + p.lf_hf_ratio)).sqrt();
        let a_lf = a_hf * p.lf_hf_ratio.sqrt();
        t += p.rr_mean_s
            + a_lf * (2.0 * PI * LF_HZ * t + phase_lf).sin()
            + a_hf * (2.0 * PI * p.resp_rate_hz * t + phase_hf).sin();
    }
    out
}

fn breaths(tl: &Timeline, total: f64, rng: &mut StreamRng) -> Vec<BreathSpec> {
    let mut out = Vec::new();
    let mut t = 0.0;
    while t < total {
        let p = &tl.at(t).profile;
        let z: f64 = StandardNormal.sample(rng);
        let period = (1.0 + p.resp_jitter * z.clamp(-3.0, 3.0)) / p.resp_rate_hz;
        out.push(BreathSpec {
            onset: t,
            period,
            insp_frac: p.insp_frac,
        });
        t += period;
    }
    out
}

fn pulses(tl: &Timeline, beats: &[f64]) -> Vec<PulseSpec> {
    beats
        .windows(2)
        .map(|w| {
            let p = &tl.at(w[0]).profile;
            let period = w[1] - w[0];
            PulseSpec {
                foot: w[0] + p.ppg_transit_s,
                period,
                rise: p.ppg_rise_frac * period,
                reflected: p.ppg_reflect_frac * period,
            }
        })
        .collect()
}

fn scr_onsets(tl: &Timeline, total: f64, rng: &mut StreamRng) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for seg in tl.segments {
        let p = &seg.profile;
        if p.scr_rate_per_min <= 0.0 {
            continue;
        }
        let gap = Exp::new(p.scr_rate_per_min / 60.0).expect("positive rate");
        let (lo, hi) = if seg.index == tl.segments[0].index { (0.0, seg.end_s) } else { (seg.start_s, seg.end_s) };
        let hi = if seg.index == tl.segments[tl.segments.len() - 1].index { total } else { hi };
        let mut t = lo + gap.sample(rng);
        while t < hi {
            out.push((t, p.scr_amplitude_us * (0.5 + rng.random::<f64>())));
            t += gap.sample(rng);
        }
    }
    out
}

/// Tonic level or temperature: per-segment level plus linear drift from the segment start.
fn ramp(tl: &Timeline, t: f64, level: impl Fn(&PhysioProfile) -> f64, slope: impl Fn(&PhysioProfile) -> f64) -> f64 {
    let seg = tl.at(t);
    level(&seg.profile) + slope(&seg.profile) * (t - seg.start_s)
}

fn noise_level(p: &PhysioProfile, m: Modality) -> f64 {
    match m {
        Modality::Ecg => p.ecg_noise,
        Modality::Ppg => p.ppg_noise,
        Modality::Rsp => p.rsp_noise,
        Modality::Eda => p.eda_noise,
        Modality::Skt => p.skt_noise,
    }
}

fn sample_times(fs: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| i as f64 / fs)
}

/// Simulate one recording of `protocol` with physiology per segment class.
pub fn generate_session(
    subject_id: &str,
    protocol: &ProtocolTemplate,
    profiles: &ProfileMap,
    seed: u64,
) -> Result<(Session, GroundTruth), SynthError> {
    for p in profiles.values() {
        p.validate()?;
    }
    let mut answer_rng = stream(seed, "t_rel", 0);
    let mut segments = protocol.segments(PAD_S);
    let mut truth_segments = Vec::with_capacity(segments.len());
    for seg in &mut segments {
        let profile = *profiles.get(&seg.class).ok_or(SynthError::MissingProfile(seg.class))?;
        let z: f64 = StandardNormal.sample(&mut answer_rng);
        let t_rel = profile.t_rel_mean + profile.t_rel_sd * z;
        let perceived = quantize_perceived(seg.t_correct() * (1.0 - t_rel / 100.0));
        seg.t_perceived_s = Some(perceived);
        truth_segments.push(SegmentTruth {
            index: seg.index,
            class: seg.class,
            start_s: seg.start_s,
            end_s: seg.end_s,
            profile,
            t_rel_planted: t_rel,
            t_perceived_s: perceived,
        });
    }
    if truth_segments.is_empty() {
        return Err(DataError::EmptyProtocol.into());
    }
    let total = protocol.total_duration_s() + 2.0 * PAD_S;
    let tl = Timeline {
        segments: &truth_segments,
    };

    let beat_times = beats(&tl, total, &mut stream(seed, "beats", 0));
    let breath_specs = breaths(&tl, total, &mut stream(seed, "breaths", 0));
    let pulse_specs = pulses(&tl, &beat_times);
    let scrs = scr_onsets(&tl, total, &mut stream(seed, "scr", 0));

    let n_of = |m: Modality| (total * m.default_fs()).round() as usize;
    let mut channels = BTreeMap::new();
    for m in Modality::ALL {
        let fs = m.default_fs();
        let n = n_of(m);
        let clean = match m {
            Modality::Ecg => waveform::ecg(&beat_times, fs, 0.0, n),
            Modality::Ppg => waveform::ppg(&pulse_specs, fs, 0.0, n),
            Modality::Rsp => waveform::respiration(&breath_specs, fs, 0.0, n),
            Modality::Eda => sample_times(fs, n)
                .map(|t| {
                    let scl = ramp(&tl, t, |p| p.scl_level_us, |p| p.scl_slope_us_per_s);
                    let scr: f64 = scrs
                        .iter()
                        .map(|&(on, amp)| waveform::scr_pulse(t, on, amp, SCR_TAU_RISE_S, SCR_TAU_DECAY_S))
                        .sum();
                    scl + scr
                })
                .collect(),
            Modality::Skt => sample_times(fs, n)
                .map(|t| ramp(&tl, t, |p| p.skt_base_c, |p| p.skt_slope))
                .collect(),
        };
        let mut rng = stream(seed, "noise", m as u64);
        let samples = noisy(clean, |i| noise_level(&tl.at(i as f64 / fs).profile, m), &mut rng);
        channels.insert(m, SignalChannel::new(m, fs, 0.0, samples)?);
    }

    let session = Session::new(subject_id, channels, segments)?;
    let truth = GroundTruth {
        subject_id: subject_id.to_string(),
        seed,
        segments: truth_segments,
        beat_times_s: beat_times,
        breaths: breath_specs,
        pulses: pulse_specs,
        scr_onsets_s: scrs.into_iter().map(|(t, _)| t).collect(),
    };
    Ok((session, truth))
}

/// Between-subject variation applied on top of the scenario profiles. With
/// `class_jitter` > 0 each subject also gets its own offsets per segment
/// class, so class effects hold on average but not for every subject.
fn subject_profiles(base: &ProfileMap, class_jitter: f64, rng: &mut StreamRng) -> ProfileMap {
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    let rr = 1.0 + 0.04 * n.sample(rng);
    let resp = 1.0 + 0.04 * n.sample(rng);
    let scl = 0.5 * n.sample(rng);
    let skt = 0.5 * n.sample(rng);
    base.iter()
        .map(|(class, p)| {
            let mut q = PhysioProfile {
                rr_mean_s: p.rr_mean_s * rr,
                resp_rate_hz: p.resp_rate_hz * resp,
                scl_level_us: (p.scl_level_us + scl).max(0.5),
                skt_base_c: p.skt_base_c + skt,
                ..*p
            };
            if class_jitter > 0.0 {
                let j = class_jitter;
                q.rr_mean_s *= (1.0 + 0.05 * j * n.sample(rng)).clamp(0.8, 1.2);
                q.resp_rate_hz *= (1.0 + 0.08 * j * n.sample(rng)).clamp(0.7, 1.3);
                q.scl_slope_us_per_s += 0.005 * j * n.sample(rng);
                q.scr_rate_per_min *= (0.4 * j * n.sample(rng)).exp();
                q.skt_slope += 0.003 * j * n.sample(rng);
            }
            (*class, q)
        })
        .collect()
}

pub fn subject_id(i: usize, n: usize) -> String {
    let width = n.to_string().len().max(2);
    format!("S{:0width$}", i + 1)
}

/// `n_subjects` sessions of the default protocol, generated in parallel from
/// per-subject seeds.
pub fn generate_cohort(
    n_subjects: usize,
    scenario: Scenario,
    seed: u64,
) -> Result<Vec<(Session, GroundTruth)>, SynthError> {
    let base = scenario_profiles(scenario);
    let protocol = ProtocolTemplate::default();
    (0..n_subjects)
        .into_par_iter()
        .map(|i| {
            let subject_seed = derive_seed(seed, "subject", i as u64);
            let profiles = subject_profiles(&base, scenario.class_jitter(), &mut stream(subject_seed, "profile", 0));
            generate_session(&subject_id(i, n_subjects), &protocol, &profiles, subject_seed)
        })
        .collect()
}

/// A single-segment protocol, for recordings in one steady state.
pub fn steady_protocol(class: SegmentClass, duration_s: f64) -> ProtocolTemplate {
    ProtocolTemplate {
        steps: vec![crate::data::ProtocolStep {
            name: "steady".into(),
            class,
            duration_s,
        }],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::registry;

    fn single(profile: PhysioProfile) -> ProfileMap {
        [(SegmentClass::Rest, profile)].into_iter().collect()
    }

    #[test]
    fn quantization() {
        assert_eq!(quantize_perceived(180.0), 180.0);
        assert_eq!(quantize_perceived(139.0), 150.0);
        assert_eq!(quantize_perceived(-20.0), 0.0);
        assert_eq!(quantize_perceived(400.0), 300.0);
    }

    #[test]
    fn exact_perception_hits_grid() {
        let p = PhysioProfile {
            t_rel_mean: 0.0,
            t_rel_sd: 0.0,
            ..Default::default()
        };
        let profiles: ProfileMap = [
            SegmentClass::Rest,
            SegmentClass::Neutral,
            SegmentClass::Emotional,
            SegmentClass::Cognitive,
        ]
        .into_iter()
        .map(|c| (c, p))
        .collect();
        let (s, _) = generate_session("a", &ProtocolTemplate::default(), &profiles, 1).unwrap();
        for seg in &s.segments {
            assert_eq!(seg.t_perceived_s, Some(quantize_perceived(seg.t_correct())));
        }
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let profiles = single(PhysioProfile::default());
        let proto = steady_protocol(SegmentClass::Rest, 60.0);
        let a = generate_session("a", &proto, &profiles, 9).unwrap();
        let b = generate_session("a", &proto, &profiles, 9).unwrap();
        let c = generate_session("a", &proto, &profiles, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn missing_profile_and_invalid_profile() {
        let profiles = single(PhysioProfile::default());
        let err = generate_session("a", &ProtocolTemplate::default(), &profiles, 1);
        assert!(matches!(err, Err(SynthError::MissingProfile(_))));
        let bad = single(PhysioProfile {
            resp_rate_hz: 0.0,
            ..Default::default()
        });
        let err = generate_session("a", &steady_protocol(SegmentClass::Rest, 60.0), &bad, 1);
        assert!(matches!(err, Err(SynthError::InvalidProfile(_))));
    }

    #[test]
    fn every_feature_has_a_target() {
        let (_, truth) =
            generate_session("a", &steady_protocol(SegmentClass::Rest, 60.0), &single(PhysioProfile::default()), 3)
                .unwrap();
        for f in registry() {
            assert!(truth.target_for(&f.name, 1).is_some(), "{}", f.name);
        }
        assert!(truth.target_for("nope", 1).is_none());
        assert!(matches!(truth.target_for("ECG_RR_mean", 1), Some(Target::Planted(v)) if v == 0.85));
    }

    #[test]
    fn cohort_shapes() {
        assert!(generate_cohort(0, Scenario::Null, 1).unwrap().is_empty());
        let c = generate_cohort(2, Scenario::PaperLike, 1).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].0.subject_id, "S01");
        assert_eq!(c[0].0.segments.len(), 9);
        assert!(c.iter().all(|(s, _)| s.validate().is_ok()));
    }
}
