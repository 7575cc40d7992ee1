//! Session storage: a JSON manifest next to one single-column CSV per channel.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DataError, Modality, Segment, SegmentClass, Session, SignalChannel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelEntry {
    pub modality: Modality,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fs_hz: Option<f64>,
    /// Path relative to the manifest's directory.
    pub file: String,
    #[serde(default)]
    pub t0_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentEntry {
    pub index: u8,
    pub name: String,
    pub class: SegmentClass,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub t_perceived_s: Option<f64>,
    #[serde(default)]
    pub vass: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub subject_id: String,
    pub channels: Vec<ChannelEntry>,
    pub segments: Vec<SegmentEntry>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn read_channel_csv(path: &Path) -> Result<Vec<f64>, DataError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut samples = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        let value: f64 = field.parse().map_err(|_| DataError::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("not a number: {field:?}"),
        })?;
        samples.push(value);
    }
    Ok(samples)
}

/// Read a manifest and every channel file it references.
pub fn load_session(manifest_path: impl AsRef<Path>) -> Result<Session, DataError> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read_to_string(manifest_path).map_err(io_err(manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| DataError::Json {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));

    let mut channels = BTreeMap::new();
    for entry in &manifest.channels {
        let file = dir.join(&entry.file);
        let samples = read_channel_csv(&file)?;
        let fs = entry.fs_hz.unwrap_or_else(|| entry.modality.default_fs());
        let ch = SignalChannel::new(entry.modality, fs, entry.t0_s, samples)?;
        if channels.insert(entry.modality, ch).is_some() {
            return Err(DataError::InvalidChannel {
                modality: entry.modality,
                reason: "declared twice in manifest".into(),
            });
        }
    }
    let segments = manifest
        .segments
        .into_iter()
        .map(|s| Segment {
            index: s.index,
            name: s.name,
            class: s.class,
            start_s: s.start_s,
            end_s: s.end_s,
            t_perceived_s: s.t_perceived_s,
            vass: s.vass,
        })
        .collect();
    Session::new(manifest.subject_id, channels, segments)
}

pub fn channel_file_name(modality: Modality) -> String {
    format!("{}.csv", modality.as_str().to_lowercase())
}

/// Write `session` into `dir` as `manifest.json` plus one CSV per channel.
/// Returns the manifest path.
pub fn save_session(session: &Session, dir: impl AsRef<Path>) -> Result<PathBuf, DataError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut entries = Vec::new();
    for ch in session.channels.values() {
        let name = channel_file_name(ch.modality);
        let path = dir.join(&name);
        let mut buf = String::with_capacity(ch.samples.len() * 12);
        for v in &ch.samples {
            buf.push_str(&v.to_string());
            buf.push('\n');
        }
        fs::write(&path, buf).map_err(io_err(&path))?;
        entries.push(ChannelEntry {
            modality: ch.modality,
            fs_hz: Some(ch.fs),
            file: name,
            t0_s: ch.t0,
        });
    }
    let manifest = Manifest {
        subject_id: session.subject_id.clone(),
        channels: entries,
        segments: session
            .segments
            .iter()
            .map(|s| SegmentEntry {
                index: s.index,
                name: s.name.clone(),
                class: s.class,
                start_s: s.start_s,
                end_s: s.end_s,
                t_perceived_s: s.t_perceived_s,
                vass: s.vass,
            })
            .collect(),
    };
    let path = dir.join("manifest.json");
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    file.write_all(json.as_bytes())
        .and_then(|_| file.write_all(b"\n"))
        .map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ProtocolTemplate;

    fn table_session(ecg_secs: f64) -> Session {
        let mut channels = BTreeMap::new();
        for m in Modality::ALL {
            let secs = if m == Modality::Ecg { ecg_secs } else { 1170.0 };
            let n = (secs * m.default_fs()) as usize;
            let samples = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
            channels.insert(m, SignalChannel::new(m, m.default_fs(), 0.0, samples).unwrap());
        }
        let mut segments = ProtocolTemplate::default().segments(0.0);
        for s in &mut segments {
            s.t_perceived_s = Some(120.0);
            s.vass = Some(40);
        }
        Session {
            subject_id: "S01".into(),
            channels,
            segments,
        }
    }

    #[test]
    fn loads_full_protocol() {
        let dir = tempfile::tempdir().unwrap();
        let path = save_session(&table_session(1170.0), dir.path()).unwrap();
        let s = load_session(&path).unwrap();
        assert_eq!(s.segments.len(), 9);
        assert_eq!(s.channels.len(), 5);
        assert_eq!(s.channel(Modality::Rsp).unwrap().fs, 32.0);
    }

    #[test]
    fn short_ecg_underruns() {
        let dir = tempfile::tempdir().unwrap();
        let session = table_session(600.0);
        let path = save_session(&session, dir.path()).unwrap();
        let err = load_session(&path).unwrap_err();
        assert!(matches!(
            err,
            DataError::ChannelUnderrun {
                modality: Modality::Ecg,
                ..
            }
        ));
        assert!(err.to_string().contains("channel underruns protocol"));
    }

    #[test]
    fn empty_segments_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = r#"{"subject_id":"a","channels":[],"segments":[]}"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        let err = load_session(dir.path().join("manifest.json")).unwrap_err();
        assert_eq!(err.to_string(), "empty protocol");
    }

    #[test]
    fn malformed_sample_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("eda.csv"), "1.0\n2.0\nabc\n").unwrap();
        let manifest = r#"{"subject_id":"a",
            "channels":[{"modality":"EDA","fs_hz":1.0,"file":"eda.csv","t0_s":0}],
            "segments":[{"index":1,"name":"x","class":"Rest","start_s":0,"end_s":2}]}"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        let err = load_session(dir.path().join("manifest.json")).unwrap_err();
        match err {
            DataError::Malformed { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn missing_channel_file_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = r#"{"subject_id":"a",
            "channels":[{"modality":"SKT","file":"nope.csv"}],
            "segments":[{"index":1,"name":"x","class":"Rest","start_s":0,"end_s":2}]}"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        let err = load_session(dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, DataError::Io { .. }));
    }

    #[test]
    fn default_rate_applies_when_omitted() {
        let dir = tempfile::tempdir().unwrap();
        let samples: String = (0..40).map(|i| format!("{i}\n")).collect();
        fs::write(dir.path().join("skt.csv"), samples).unwrap();
        let manifest = r#"{"subject_id":"a",
            "channels":[{"modality":"SKT","file":"skt.csv"}],
            "segments":[{"index":1,"name":"x","class":"Rest","start_s":0,"end_s":10}]}"#;
        fs::write(dir.path().join("manifest.json"), manifest).unwrap();
        let s = load_session(dir.path().join("manifest.json")).unwrap();
        assert_eq!(s.channel(Modality::Skt).unwrap().fs, 4.0);
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        let session = table_session(1170.0);
        let p = save_session(&session, a.path()).unwrap();
        let loaded = load_session(&p).unwrap();
        assert_eq!(loaded, session);
        save_session(&loaded, b.path()).unwrap();
        for name in ["manifest.json", "ecg.csv", "rsp.csv"] {
            let x = fs::read(a.path().join(name)).unwrap();
            let y = fs::read(b.path().join(name)).unwrap();
            assert_eq!(x, y, "{name}");
        }
    }
}
