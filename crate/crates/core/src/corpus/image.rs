//! Single-frame geometry and intensity normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A row-major H×W intensity grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub height: usize,
    pub width: usize,
    pub data: Vec<f32>,
}

impl Grid {
    pub fn new(height: usize, width: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "{} values for a {height}x{width} grid",
                data.len()
            )));
        }
        Ok(Self { height, width, data })
    }

    pub fn filled(height: usize, width: usize, value: f32) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f32 {
        self.data[row * self.width + col]
    }
}

/// Source coordinate for output index `i` under corner-aligned sampling.
fn source_coord(i: usize, n_in: usize, n_out: usize) -> f64 {
    if n_out == 1 {
        (n_in - 1) as f64 / 2.0
    } else {
        i as f64 * (n_in - 1) as f64 / (n_out - 1) as f64
    }
}

/// Bilinear resize with corner-aligned sampling: output corners coincide with
/// input corners.
pub fn resize_bilinear(frame: &Grid, out_h: usize, out_w: usize) -> Result<Grid> {
    if frame.height == 0 || frame.width == 0 {
        return Err(Error::Shape("cannot resize an empty frame".into()));
    }
    if out_h == 0 || out_w == 0 {
        return Err(Error::invalid("resize target must be at least 1x1"));
    }
    let cols: Vec<(usize, usize, f64)> = (0..out_w)
        .map(|j| {
            let x = source_coord(j, frame.width, out_w);
            let x0 = (x.floor() as usize).min(frame.width - 1);
            let x1 = (x0 + 1).min(frame.width - 1);
            (x0, x1, x - x0 as f64)
        })
        .collect();
    let mut out = Vec::with_capacity(out_h * out_w);
    for i in 0..out_h {
        let y = source_coord(i, frame.height, out_h);
        let y0 = (y.floor() as usize).min(frame.height - 1);
        let y1 = (y0 + 1).min(frame.height - 1);
        let fy = y - y0 as f64;
        for &(x0, x1, fx) in &cols {
            let top = f64::from(frame.at(y0, x0)) * (1.0 - fx) + f64::from(frame.at(y0, x1)) * fx;
            let bottom = f64::from(frame.at(y1, x0)) * (1.0 - fx) + f64::from(frame.at(y1, x1)) * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    Grid::new(out_h, out_w, out)
}

/// Centered crop. An odd margin leaves the extra row/column on the
/// bottom/right side, which is the part discarded.
pub fn crop_center(frame: &Grid, out_h: usize, out_w: usize) -> Result<Grid> {
    if out_h > frame.height || out_w > frame.width {
        return Err(Error::invalid(format!(
            "cannot crop {}x{} to larger {out_h}x{out_w}",
            frame.height, frame.width
        )));
    }
    let top = (frame.height - out_h) / 2;
    let left = (frame.width - out_w) / 2;
    let mut out = Vec::with_capacity(out_h * out_w);
    for r in top..top + out_h {
        let start = r * frame.width + left;
        out.extend_from_slice(&frame.data[start..start + out_w]);
    }
    Grid::new(out_h, out_w, out)
}

/// Global intensity statistics of a training split.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    /// Population mean and standard deviation over every pixel of every frame.
    pub fn fit<'a>(frames: impl IntoIterator<Item = &'a [f32]> + Clone) -> Result<Self> {
        let (mut n, mut sum) = (0usize, 0.0f64);
        for f in frames.clone() {
            n += f.len();
            sum += f.iter().map(|&v| f64::from(v)).sum::<f64>();
        }
        if n == 0 {
            return Err(Error::invalid("normalization needs a nonempty training set"));
        }
        let mean = sum / n as f64;
        let ss: f64 = frames
            .into_iter()
            .map(|f| f.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>())
            .sum();
        let std = (ss / n as f64).sqrt();
        if !(std > 0.0) {
            return Err(Error::invalid("training pixels have zero variance"));
        }
        Ok(Self { mean, std })
    }

    #[inline]
    pub fn apply(&self, v: f32) -> f64 {
        (f64::from(v) - self.mean) / self.std
    }

    pub fn apply_frame(&self, frame: &[f32]) -> Vec<f64> {
        frame.iter().map(|&v| self.apply(v)).collect()
    }
}
