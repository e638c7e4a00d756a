use super::net::infer_batch;
use super::{FeatNetConfig, FeatNetParams};
use crate::corpus::{resize_bilinear, window_samples, FrameSequence, Grid};
use crate::error::{Error, Result};
use crate::recognizer::FeatureMatrix;

const CONTEXT: usize = 7;
const EXTRACT_CHUNK: usize = 64;

/// Windowed training samples over a shared pool of normalized frames.
#[derive(Clone, Debug, Default)]
pub struct SampleSet {
    frame_len: usize,
    frames: Vec<f32>,
    items: Vec<([u32; CONTEXT], u16)>,
}

impl SampleSet {
    pub fn new(frame_len: usize) -> Self {
        Self { frame_len, ..Default::default() }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Adds the frames of one utterance and a sample for every anchor `t`
    /// with `t % stride == phase % stride`.
    pub fn add_utterance(&mut self, frames: &[Vec<f64>], labels: &[u16], stride: usize, phase: usize) -> Result<()> {
        if frames.len() != labels.len() {
            return Err(Error::Shape(format!("{} frames with {} labels", frames.len(), labels.len())));
        }
        let base = self.frames.len() / self.frame_len.max(1);
        for f in frames {
            if f.len() != self.frame_len {
                return Err(Error::Shape(format!("frame of {} pixels, expected {}", f.len(), self.frame_len)));
            }
            self.frames.extend(f.iter().map(|&v| v as f32));
        }
        let stride = stride.max(1);
        for w in window_samples(frames.len(), Some(labels)) {
            if w.anchor % stride == phase % stride {
                let idx = w.frames.map(|i| (base + i) as u32);
                self.items.push((idx, w.label.expect("labels present")));
            }
        }
        Ok(())
    }

    pub fn label(&self, i: usize) -> u16 {
        self.items[i].1
    }

    pub fn input(&self, i: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(CONTEXT * self.frame_len);
        for &f in &self.items[i].0 {
            let s = f as usize * self.frame_len;
            out.extend(self.frames[s..s + self.frame_len].iter().map(|&v| f64::from(v)));
        }
        out
    }
}

/// Resizes frames to the network input size if needed and applies the
/// configured normalization.
pub fn prepare_frames(seq: &FrameSequence, cfg: &FeatNetConfig) -> Result<Vec<Vec<f64>>> {
    let [_, h, w] = cfg.input_shape;
    let norm = cfg
        .normalization
        .ok_or_else(|| Error::invalid("network configuration has no pixel normalization"))?;
    (0..seq.len())
        .map(|i| {
            let g = if seq.height == h && seq.width == w {
                Grid::new(h, w, seq.frame(i).to_vec())?
            } else {
                resize_bilinear(&seq.grid(i), h, w)?
            };
            Ok(norm.apply_frame(&g.data))
        })
        .collect()
}

/// One bottleneck vector per frame, computed in inference mode.
pub fn extract_bottleneck(params: &FeatNetParams, cfg: &FeatNetConfig, frames: &[Vec<f64>]) -> Result<FeatureMatrix> {
    if cfg.input_shape[0] != CONTEXT {
        return Err(Error::Shape(format!("extraction needs {CONTEXT} input channels, config has {}", cfg.input_shape[0])));
    }
    let frame_len = cfg.input_shape[1] * cfg.input_shape[2];
    if let Some(f) = frames.iter().find(|f| f.len() != frame_len) {
        return Err(Error::Shape(format!("frame of {} pixels, expected {frame_len}", f.len())));
    }
    let dim = cfg.bottleneck_dim();
    let mut data = Vec::with_capacity(frames.len() * dim);
    let windows = window_samples(frames.len(), None);
    for chunk in windows.chunks(EXTRACT_CHUNK) {
        let inputs: Vec<Vec<f64>> = chunk
            .iter()
            .map(|w| w.frames.iter().flat_map(|&i| frames[i].iter().copied()).collect())
            .collect();
        let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        for out in infer_batch(params, cfg, &refs)? {
            if out.bottleneck.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite bottleneck feature".into()));
            }
            data.extend(out.bottleneck);
        }
    }
    if frames.is_empty() {
        return Err(Error::invalid("cannot extract features from an empty sequence"));
    }
    FeatureMatrix::new(dim, data)
}
