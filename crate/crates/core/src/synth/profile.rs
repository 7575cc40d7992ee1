//! Planted physiology per segment class.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::SegmentClass;

use super::SynthError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysioProfile {
    pub rr_mean_s: f64,
    pub rr_sdnn_s: f64,
    pub lf_hf_ratio: f64,
    pub resp_rate_hz: f64,
    pub insp_frac: f64,
    /// Relative jitter of breath periods.
    pub resp_jitter: f64,
    pub scl_level_us: f64,
    pub scl_slope_us_per_s: f64,
    pub scr_rate_per_min: f64,
    pub scr_amplitude_us: f64,
    pub skt_base_c: f64,
    pub skt_slope: f64,
    /// Foot-to-peak time as a fraction of the pulse period.
    pub ppg_rise_frac: f64,
    /// Foot-to-reflected-wave time as a fraction of the pulse period.
    pub ppg_reflect_frac: f64,
    /// Beat-to-foot transit time.
    pub ppg_transit_s: f64,
    pub ecg_noise: f64,
    pub ppg_noise: f64,
    pub rsp_noise: f64,
    pub eda_noise: f64,
    pub skt_noise: f64,
    pub t_rel_mean: f64,
    pub t_rel_sd: f64,
}

impl Default for PhysioProfile {
    fn default() -> Self {
        Self {
            rr_mean_s: 0.85,
            rr_sdnn_s: 0.03,
            lf_hf_ratio: 1.5,
            resp_rate_hz: 0.25,
            insp_frac: 0.4,
            resp_jitter: 0.03,
            scl_level_us: 5.0,
            scl_slope_us_per_s: 0.0,
            scr_rate_per_min: 2.0,
            scr_amplitude_us: 0.3,
            skt_base_c: 33.0,
            skt_slope: 0.0,
            ppg_rise_frac: 0.18,
            ppg_reflect_frac: 0.5,
            ppg_transit_s: 0.2,
            ecg_noise: 0.01,
            ppg_noise: 0.002,
            rsp_noise: 0.02,
            eda_noise: 0.005,
            skt_noise: 0.005,
            t_rel_mean: 0.0,
            t_rel_sd: 35.0,
        }
    }
}

impl PhysioProfile {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |what: &str| Err(SynthError::InvalidProfile(what.to_string()));
        let positive = [
            ("rr_mean_s", self.rr_mean_s),
            ("resp_rate_hz", self.resp_rate_hz),
            ("scl_level_us", self.scl_level_us),
            ("skt_base_c", self.skt_base_c),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive, got {v}"));
            }
        }
        let non_negative = [
            ("rr_sdnn_s", self.rr_sdnn_s),
            ("lf_hf_ratio", self.lf_hf_ratio),
            ("resp_jitter", self.resp_jitter),
            ("scr_rate_per_min", self.scr_rate_per_min),
            ("scr_amplitude_us", self.scr_amplitude_us),
            ("ppg_transit_s", self.ppg_transit_s),
            ("ecg_noise", self.ecg_noise),
            ("ppg_noise", self.ppg_noise),
            ("rsp_noise", self.rsp_noise),
            ("eda_noise", self.eda_noise),
            ("skt_noise", self.skt_noise),
            ("t_rel_sd", self.t_rel_sd),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be non-negative, got {v}"));
            }
        }
        if !(self.insp_frac > 0.0 && self.insp_frac < 1.0) {
            return bad(&format!("insp_frac must be in (0, 1), got {}", self.insp_frac));
        }
        if !(self.ppg_rise_frac > 0.0 && self.ppg_rise_frac < self.ppg_reflect_frac && self.ppg_reflect_frac < 1.0) {
            return bad("need 0 < ppg_rise_frac < ppg_reflect_frac < 1");
        }
        if 3.0 * self.rr_sdnn_s >= self.rr_mean_s {
            return bad("rr_sdnn_s too large for rr_mean_s");
        }
        if !self.t_rel_mean.is_finite() {
            return bad("t_rel_mean must be finite");
        }
        Ok(())
    }
}

pub type ProfileMap = BTreeMap<SegmentClass, PhysioProfile>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    PaperLike,
    Separable,
    Null,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::PaperLike => "paper_like",
            Scenario::Separable => "separable",
            Scenario::Null => "null",
        }
    }

    /// Scale of the per-subject, per-class physiology offsets.
    pub fn class_jitter(self) -> f64 {
        match self {
            Scenario::PaperLike => 1.0,
            Scenario::Separable | Scenario::Null => 0.0,
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper_like" => Ok(Scenario::PaperLike),
            "separable" => Ok(Scenario::Separable),
            "null" => Ok(Scenario::Null),
            other => Err(format!("unknown scenario {other:?} (expected paper_like, separable or null)")),
        }
    }
}

/// Group means of t_rel planted by the paper-like scenario.
pub const PAPER_T_REL: [(SegmentClass, f64); 3] = [
    (SegmentClass::Emotional, -16.1),
    (SegmentClass::Neutral, 6.94),
    (SegmentClass::Cognitive, 23.6),
];

pub fn scenario_profiles(scenario: Scenario) -> ProfileMap {
    let base = PhysioProfile::default();
    let mut map = ProfileMap::new();
    match scenario {
        Scenario::Null => {
            for class in [SegmentClass::Rest, SegmentClass::Neutral, SegmentClass::Emotional, SegmentClass::Cognitive] {
                map.insert(class, base);
            }
        }
        Scenario::PaperLike => {
            map.insert(SegmentClass::Rest, base);
            map.insert(
                SegmentClass::Neutral,
                PhysioProfile {
                    t_rel_mean: PAPER_T_REL[1].1,
                    ..base
                },
            );
            map.insert(
                SegmentClass::Emotional,
                PhysioProfile {
                    rr_mean_s: 0.80,
                    resp_rate_hz: 0.27,
                    scl_slope_us_per_s: 0.004,
                    scr_rate_per_min: 4.0,
                    skt_slope: -0.002,
                    t_rel_mean: PAPER_T_REL[0].1,
                    ..base
                },
            );
            map.insert(
                SegmentClass::Cognitive,
                PhysioProfile {
                    rr_mean_s: 0.75,
                    resp_rate_hz: 0.30,
                    insp_frac: 0.38,
                    scl_slope_us_per_s: 0.006,
                    scr_rate_per_min: 5.0,
                    skt_slope: -0.003,
                    t_rel_mean: PAPER_T_REL[2].1,
                    ..base
                },
            );
        }
        Scenario::Separable => {
            map.insert(SegmentClass::Rest, base);
            map.insert(
                SegmentClass::Neutral,
                PhysioProfile {
                    rr_mean_s: 0.95,
                    resp_rate_hz: 0.2,
                    scl_level_us: 3.0,
                    scr_rate_per_min: 1.0,
                    skt_slope: 0.003,
                    t_rel_mean: 0.0,
                    t_rel_sd: 15.0,
                    ..base
                },
            );
            map.insert(
                SegmentClass::Emotional,
                PhysioProfile {
                    rr_mean_s: 0.78,
                    resp_rate_hz: 0.28,
                    insp_frac: 0.45,
                    scl_level_us: 8.0,
                    scr_rate_per_min: 6.0,
                    skt_slope: -0.004,
                    t_rel_mean: -40.0,
                    t_rel_sd: 15.0,
                    ..base
                },
            );
            map.insert(
                SegmentClass::Cognitive,
                PhysioProfile {
                    rr_mean_s: 0.64,
                    resp_rate_hz: 0.38,
                    insp_frac: 0.35,
                    scl_level_us: 13.0,
                    scr_rate_per_min: 10.0,
                    skt_slope: 0.0,
                    t_rel_mean: 40.0,
                    t_rel_sd: 15.0,
                    ..base
                },
            );
        }
    }
    map
}
