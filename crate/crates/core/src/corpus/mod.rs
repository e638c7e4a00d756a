//! Corpus data model, on-disk formats and frame preprocessing.

mod artf;
mod image;
mod manifest;
mod split;
mod window;

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use artf::{read_artf, read_artf_header, write_artf, ArtfHeader, Dtype, ARTF_HEADER_LEN};
pub use image::{crop_center, resize_bilinear, Grid, NormStats};
pub use manifest::{load_manifest, read_labels, save_manifest, write_labels, DEFAULT_ULT_FPS, DEFAULT_VID_FPS};
pub use split::{split_prompt_disjoint, SplitOptions};
pub use window::{window_samples, WindowSample, WINDOW_OFFSETS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Ultrasound,
    Video,
}

/// Speaking mode of an utterance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Modal,
    Silent,
    Whispered,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Modal, Mode::Silent, Mode::Whispered];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Modal => "modal",
            Mode::Silent => "silent",
            Mode::Whispered => "whispered",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modal" => Ok(Mode::Modal),
            "silent" => Ok(Mode::Silent),
            "whispered" => Ok(Mode::Whispered),
            other => Err(Error::invalid(format!("unknown speaking mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

/// A time-ordered stack of equally sized grayscale frames.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    pub modality: Modality,
    pub fps: f64,
    pub height: usize,
    pub width: usize,
    /// Storage type used when the sequence is written back to disk.
    pub dtype: Dtype,
    data: Vec<f32>,
}

impl FrameSequence {
    pub fn new(
        modality: Modality,
        fps: f64,
        height: usize,
        width: usize,
        dtype: Dtype,
        data: Vec<f32>,
    ) -> Result<Self> {
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("frame rate must be positive, got {fps}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::Shape("frames must have nonzero height and width".into()));
        }
        if data.is_empty() || !data.len().is_multiple_of(height * width) {
            return Err(Error::Shape(format!(
                "{} values do not form whole {height}x{width} frames",
                data.len()
            )));
        }
        Ok(Self {
            modality,
            fps,
            height,
            width,
            dtype,
            data,
        })
    }

    pub fn from_grids(modality: Modality, fps: f64, dtype: Dtype, frames: &[Grid]) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| Error::Shape("frame sequence needs at least one frame".into()))?;
        let (h, w) = (first.height, first.width);
        let mut data = Vec::with_capacity(h * w * frames.len());
        for (i, g) in frames.iter().enumerate() {
            if g.height != h || g.width != w {
                return Err(Error::Shape(format!(
                    "frame {i} is {}x{}, expected {h}x{w}",
                    g.height, g.width
                )));
            }
            data.extend_from_slice(&g.data);
        }
        Self::new(modality, fps, h, w, dtype, data)
    }

    pub fn len(&self) -> usize {
        self.data.len() / (self.height * self.width)
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn frame(&self, index: usize) -> &[f32] {
        let n = self.height * self.width;
        &self.data[index * n..(index + 1) * n]
    }

    pub fn grid(&self, index: usize) -> Grid {
        Grid::new(self.height, self.width, self.frame(index).to_vec())
            .expect("frame slice matches sequence shape")
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.height * self.width)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    /// Applies `f` to every frame, producing a sequence of the new shape.
    pub fn map_frames(&self, mut f: impl FnMut(Grid) -> Result<Grid>) -> Result<FrameSequence> {
        let grids = (0..self.len())
            .map(|i| f(self.grid(i)))
            .collect::<Result<Vec<_>>>()?;
        Self::from_grids(self.modality, self.fps, Dtype::F32, &grids)
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.fps
    }
}

/// Reference to an on-disk frame file; the payload is read on first access.
#[derive(Debug)]
pub struct FrameRef {
    /// Path as written in the manifest (relative to the manifest directory).
    pub path: PathBuf,
    resolved: PathBuf,
    pub header: ArtfHeader,
    cache: OnceLock<Arc<FrameSequence>>,
}

impl FrameRef {
    pub fn open(root: &Path, path: impl Into<PathBuf>) -> Result<Self> {
        let path = path.into();
        let resolved = root.join(&path);
        let header = read_artf_header(&resolved)?;
        Ok(Self {
            path,
            resolved,
            header,
            cache: OnceLock::new(),
        })
    }

    /// Wraps an in-memory sequence under the given manifest-relative path.
    pub fn from_sequence(path: impl Into<PathBuf>, seq: FrameSequence) -> Self {
        let path = path.into();
        let header = ArtfHeader {
            dtype: seq.dtype,
            height: seq.height as u16,
            width: seq.width as u16,
            n_frames: seq.len() as u32,
        };
        let cache = OnceLock::new();
        let _ = cache.set(Arc::new(seq));
        Self {
            resolved: path.clone(),
            path,
            header,
            cache,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.header.n_frames as usize
    }

    pub fn load(&self, modality: Modality, fps: f64) -> Result<Arc<FrameSequence>> {
        if let Some(seq) = self.cache.get() {
            return Ok(Arc::clone(seq));
        }
        let (header, data) = read_artf(&self.resolved)?;
        let seq = FrameSequence::new(
            modality,
            fps,
            header.height as usize,
            header.width as usize,
            header.dtype,
            data,
        )?;
        Ok(Arc::clone(self.cache.get_or_init(|| Arc::new(seq))))
    }

    pub fn is_loaded(&self) -> bool {
        self.cache.get().is_some()
    }
}

impl Clone for FrameRef {
    fn clone(&self) -> Self {
        let cache = OnceLock::new();
        if let Some(seq) = self.cache.get() {
            let _ = cache.set(Arc::clone(seq));
        }
        Self {
            path: self.path.clone(),
            resolved: self.resolved.clone(),
            header: self.header,
            cache,
        }
    }
}

impl PartialEq for FrameRef {
    fn eq(&self, other: &Self) -> bool {
        self.path == other.path && self.header == other.header
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct UtteranceRecord {
    pub id: String,
    pub speaker: String,
    pub session: String,
    pub mode: Mode,
    pub prompt: String,
    pub syllables: u32,
    pub duration_s: f64,
    pub ultrasound: FrameRef,
    pub video: Option<FrameRef>,
    pub labels_path: Option<PathBuf>,
    pub labels: Option<Vec<u16>>,
    pub split: Option<Split>,
}

impl UtteranceRecord {
    pub fn words(&self) -> Vec<&str> {
        self.prompt.split_whitespace().collect()
    }

    /// Prompt with whitespace normalized; used as the identity key for splits.
    pub fn prompt_key(&self) -> String {
        self.words().join(" ")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::invalid(format!(
                "record {}: duration must be positive, got {}",
                self.id, self.duration_s
            )));
        }
        if self.syllables < 1 {
            return Err(Error::invalid(format!(
                "record {}: syllable count must be at least 1",
                self.id
            )));
        }
        if let Some(labels) = &self.labels {
            let n = self.ultrasound.n_frames();
            if labels.len() != n {
                return Err(Error::invalid(format!(
                    "record {}: {} phone labels for {n} ultrasound frames",
                    self.id,
                    labels.len()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    /// Directory that relative paths in the records resolve against.
    pub root: PathBuf,
    pub phones: Vec<String>,
    pub ult_fps: f64,
    pub vid_fps: f64,
    pub records: Vec<UtteranceRecord>,
}

impl Manifest {
    pub fn ultrasound(&self, record: &UtteranceRecord) -> Result<Arc<FrameSequence>> {
        record.ultrasound.load(Modality::Ultrasound, self.ult_fps)
    }

    pub fn video(&self, record: &UtteranceRecord) -> Result<Option<Arc<FrameSequence>>> {
        record
            .video
            .as_ref()
            .map(|v| v.load(Modality::Video, self.vid_fps))
            .transpose()
    }

    pub fn with_split(&self, split: Split) -> impl Iterator<Item = &UtteranceRecord> {
        self.records.iter().filter(move |r| r.split == Some(split))
    }

    pub fn phone_index(&self, symbol: &str) -> Option<usize> {
        self.phones.iter().position(|p| p == symbol)
    }

    /// Checks every record invariant plus train/test prompt disjointness.
    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::HashSet::new();
        for r in &self.records {
            if !ids.insert(r.id.as_str()) {
                return Err(Error::invalid(format!("duplicate record id '{}'", r.id)));
            }
            r.validate()?;
            if let Some(labels) = &r.labels {
                if let Some(bad) = labels.iter().find(|&&l| l as usize >= self.phones.len()) {
                    return Err(Error::invalid(format!(
                        "record {}: phone index {bad} outside inventory of {}",
                        r.id,
                        self.phones.len()
                    )));
                }
            }
        }
        let test: std::collections::HashSet<String> =
            self.with_split(Split::Test).map(|r| r.prompt_key()).collect();
        if let Some(r) = self
            .with_split(Split::Train)
            .find(|r| test.contains(&r.prompt_key()))
        {
            return Err(Error::invalid(format!(
                "record {}: prompt '{}' occurs in both train and test",
                r.id, r.prompt
            )));
        }
        Ok(())
    }
}
