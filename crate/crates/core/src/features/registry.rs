//! The fixed catalog of window-level features.

use std::sync::LazyLock;

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FeatureGroup {
    Skt,
    Eda,
    Rsp,
    Ecg,
    Ppg,
}

impl FeatureGroup {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureGroup::Skt => "SKT",
            FeatureGroup::Eda => "EDA",
            FeatureGroup::Rsp => "RSP",
            FeatureGroup::Ecg => "ECG",
            FeatureGroup::Ppg => "PPG",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureInfo {
    pub name: String,
    pub group: FeatureGroup,
    pub units: &'static str,
    /// Physiological parameter the column summarizes.
    pub symbol: String,
}

pub const STATS: [&str; 3] = ["mean", "median", "std"];

pub const RSP_PARAMS: [(&str, &str); 4] = [
    ("RSP_Rate", "breaths/min"),
    ("RSP_Prd", "s"),
    ("InspTime", "s"),
    ("ExpTime", "s"),
];

pub const PPG_PARAMS: [&str; 4] = ["PPG_PP", "PPG_PRT", "PPG_PDT", "PPG_PW"];

fn build() -> Vec<FeatureInfo> {
    let mut out = Vec::new();
    let mut add = |name: String, group, units, symbol: String| {
        out.push(FeatureInfo {
            name,
            group,
            units,
            symbol,
        })
    };
    use FeatureGroup::*;
    add("SKT_gradient".into(), Skt, "°C/s", "SKT_gradient".into());
    add("SKT_power".into(), Skt, "°C²", "SKT_power".into());
    add("SCL_gradient".into(), Eda, "µS/s", "SCL_gradient".into());
    add("SCL_mean".into(), Eda, "µS", "SCL_mean".into());
    add("SCR_power".into(), Eda, "µS²", "SCR_power".into());

    for (param, units) in RSP_PARAMS {
        for stat in STATS {
            let name = if param.starts_with("RSP_") {
                format!("{param}_{stat}")
            } else {
                format!("RSP_{param}_{stat}")
            };
            add(name, Rsp, units, param.into());
        }
    }
    for k in 1..=4 {
        add(format!("RSP_PSD_{k}"), Rsp, "a.u.", "RSP_PSD".into());
    }
    for k in 1..=4 {
        add(format!("RSP_nPSD_{k}"), Rsp, "1", "RSP_nPSD".into());
    }
    for k in 1..=5 {
        add(format!("RSP_pBF_{k}"), Rsp, "1", "RSP_pBF".into());
    }
    add("RSP_F1pond".into(), Rsp, "Hz", "RSP_F1pond".into());
    add("RSP_Pk".into(), Rsp, "Hz", "RSP_Pk".into());
    add("RSP_power".into(), Rsp, "a.u.", "RSP_power".into());

    add("ECG_RR_mean".into(), Ecg, "s", "ECG_RR_mean".into());
    add("ECG_RR_median".into(), Ecg, "s", "ECG_RR_median".into());
    add("ECG_RR_SDNN".into(), Ecg, "s", "ECG_RR_SDNN".into());
    for band in ["nVLF", "nLF", "nHF"] {
        add(format!("ECG_RR_{band}"), Ecg, "1", format!("ECG_RR_{band}"));
    }
    add("ECG_RR_T".into(), Ecg, "s", "T".into());
    add("ECG_RR_L".into(), Ecg, "s", "L".into());
    add("ECG_RR_CSI".into(), Ecg, "1", "CSI".into());
    add("ECG_RR_CSI_modified".into(), Ecg, "s", "CSI_modified".into());

    for param in PPG_PARAMS {
        for stat in STATS {
            add(format!("{param}_{stat}"), Ppg, "s", param.into());
        }
    }
    for band in ["nVLF", "nLF", "nHF"] {
        add(format!("PPG_PP_{band}"), Ppg, "1", format!("PPG_PP_{band}"));
    }
    out
}

static REGISTRY: LazyLock<Vec<FeatureInfo>> = LazyLock::new(build);

/// Every feature column, in matrix order.
pub fn registry() -> &'static [FeatureInfo] {
    &REGISTRY
}

pub fn feature_names() -> Vec<String> {
    REGISTRY.iter().map(|f| f.name.clone()).collect()
}

pub fn feature_index(name: &str) -> Option<usize> {
    REGISTRY.iter().position(|f| f.name == name)
}
