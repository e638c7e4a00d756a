//! JSON manifest and binary phone-label files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FrameRef, Manifest, Mode, Split, UtteranceRecord};
use crate::error::{Error, Result};

/// Nominal ultrasound frame rate when the manifest does not state one.
pub const DEFAULT_ULT_FPS: f64 = 80.0;
/// Nominal lip-video frame rate when the manifest does not state one.
pub const DEFAULT_VID_FPS: f64 = 60.0;

#[derive(Serialize, Deserialize)]
struct RawManifest {
    phones: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ult_fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vid_fps: Option<f64>,
    records: Vec<RawRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    id: String,
    speaker: String,
    session: String,
    mode: Mode,
    prompt: String,
    syllables: u32,
    duration_s: f64,
    ult_path: PathBuf,
    #[serde(default)]
    vid_path: Option<PathBuf>,
    #[serde(default)]
    labels_path: Option<PathBuf>,
    #[serde(default)]
    split: Option<Split>,
}

/// Loads and links a manifest. Frame headers and label files are read now so
/// that length invariants can be checked; pixel payloads stay on disk until
/// first use.
pub fn load_manifest(path: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: RawManifest = serde_json::from_str(&text).map_err(|e| {
        Error::parse(
            format!("{}:{}:{}", path.display(), e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut records = Vec::with_capacity(raw.records.len());
    for (i, r) in raw.records.into_iter().enumerate() {
        let ctx = |field: &str| format!("{} record {i} ({}) field `{field}`", path.display(), r.id);
        let ultrasound = FrameRef::open(&root, &r.ult_path)
            .map_err(|e| Error::parse(ctx("ult_path"), e.to_string()))?;
        let video = r
            .vid_path
            .as_ref()
            .map(|p| FrameRef::open(&root, p))
            .transpose()
            .map_err(|e| Error::parse(ctx("vid_path"), e.to_string()))?;
        let labels = r
            .labels_path
            .as_ref()
            .map(|p| read_labels(&root.join(p)))
            .transpose()
            .map_err(|e| Error::parse(ctx("labels_path"), e.to_string()))?;
        let record = UtteranceRecord {
            id: r.id,
            speaker: r.speaker,
            session: r.session,
            mode: r.mode,
            prompt: r.prompt,
            syllables: r.syllables,
            duration_s: r.duration_s,
            ultrasound,
            video,
            labels_path: r.labels_path,
            labels,
            split: r.split,
        };
        record.validate()?;
        records.push(record);
    }
    let manifest = Manifest {
        root,
        phones: raw.phones,
        ult_fps: raw.ult_fps.unwrap_or(DEFAULT_ULT_FPS),
        vid_fps: raw.vid_fps.unwrap_or(DEFAULT_VID_FPS),
        records,
    };
    manifest.validate()?;
    Ok(manifest)
}

/// Writes the manifest JSON. Frame and label payloads are expected to exist
/// at their recorded paths already.
pub fn save_manifest(manifest: &Manifest, path: &Path) -> Result<()> {
    let raw = RawManifest {
        phones: manifest.phones.clone(),
        ult_fps: Some(manifest.ult_fps),
        vid_fps: Some(manifest.vid_fps),
        records: manifest
            .records
            .iter()
            .map(|r| RawRecord {
                id: r.id.clone(),
                speaker: r.speaker.clone(),
                session: r.session.clone(),
                mode: r.mode,
                prompt: r.prompt.clone(),
                syllables: r.syllables,
                duration_s: r.duration_s,
                ult_path: r.ultrasound.path.clone(),
                vid_path: r.video.as_ref().map(|v| v.path.clone()),
                labels_path: r.labels_path.clone(),
                split: r.split,
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&raw)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path) -> Result<Vec<u16>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 2 != 0 {
        return Err(Error::parse(path.display().to_string(), "odd byte count in u16 label file"));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect())
}

pub fn write_labels(path: &Path, labels: &[u16]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let bytes: Vec<u8> = labels.iter().flat_map(|l| l.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{write_artf, Dtype};

    fn write_utt(dir: &Path, id: &str, n_frames: usize, n_labels: usize) {
        let data = vec![7.0f32; n_frames * 4];
        write_artf(&dir.join(format!("ult/{id}.artf")), Dtype::U8, 2, 2, &data).unwrap();
        write_labels(&dir.join(format!("lab/{id}.lab")), &vec![1u16; n_labels]).unwrap();
    }

    fn manifest_json() -> String {
        r#"{
  "phones": ["a", "b", "c"],
  "records": [
    {"id": "u1", "speaker": "s1", "session": "1", "mode": "modal", "prompt": "a b",
     "syllables": 2, "duration_s": 1.0, "ult_path": "ult/u1.artf", "vid_path": null,
     "labels_path": "lab/u1.lab", "split": "train"},
    {"id": "u2", "speaker": "s1", "session": "1", "mode": "silent", "prompt": "c",
     "syllables": 1, "duration_s": 0.5, "ult_path": "ult/u2.artf", "vid_path": null,
     "labels_path": "lab/u2.lab", "split": "test"}
  ]
}"#
        .to_string()
    }

    #[test]
    fn loads_two_records_lazily() {
        let dir = tempfile::tempdir().unwrap();
        write_utt(dir.path(), "u1", 5, 5);
        write_utt(dir.path(), "u2", 3, 3);
        let p = dir.path().join("manifest.json");
        fs::write(&p, manifest_json()).unwrap();
        let m = load_manifest(&p).unwrap();
        assert_eq!(m.records.len(), 2);
        assert_eq!(m.ult_fps, DEFAULT_ULT_FPS);
        assert!(!m.records[0].ultrasound.is_loaded());
        let seq = m.ultrasound(&m.records[0]).unwrap();
        assert_eq!(seq.len(), 5);
        assert!(m.records[0].ultrasound.is_loaded());
    }

    #[test]
    fn label_length_mismatch_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_utt(dir.path(), "u1", 5, 4);
        write_utt(dir.path(), "u2", 3, 3);
        let p = dir.path().join("manifest.json");
        fs::write(&p, manifest_json()).unwrap();
        let err = load_manifest(&p).unwrap_err().to_string();
        assert!(err.contains("4 phone labels for 5"), "{err}");
    }

    #[test]
    fn missing_frame_file_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        write_utt(dir.path(), "u1", 5, 5);
        let p = dir.path().join("manifest.json");
        fs::write(&p, manifest_json()).unwrap();
        let err = load_manifest(&p).unwrap_err().to_string();
        assert!(err.contains("u2") && err.contains("ult_path"), "{err}");
    }

    #[test]
    fn syntax_error_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        fs::write(&p, "{\n  \"phones\": [\n  oops\n}").unwrap();
        let err = load_manifest(&p).unwrap_err().to_string();
        assert!(err.contains("manifest.json:3:"), "{err}");
    }
}
