use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Point;
use crate::corpus::Grid;
use crate::error::{Error, Result};

/// Tongue surface points of one frame, ordered left to right.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TongueContour {
    pub utt_id: String,
    pub frame: usize,
    pub points: Vec<Point>,
}

impl TongueContour {
    pub fn validate(&self, height: usize, width: usize) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::invalid(format!(
                "contour {}#{} has {} points, need at least 2",
                self.utt_id,
                self.frame,
                self.points.len()
            )));
        }
        let (w, h) = (width as f64, height as f64);
        if let Some(p) = self
            .points
            .iter()
            .find(|p| !(p[0] >= 0.0 && p[0] <= w - 1.0 && p[1] >= 0.0 && p[1] <= h - 1.0))
        {
            return Err(Error::invalid(format!(
                "contour {}#{} point ({}, {}) outside {height}x{width} image",
                self.utt_id, self.frame, p[0], p[1]
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    /// Minimum smoothed column peak for the column to contribute a point.
    pub threshold: f32,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self { threshold: 0.5 }
    }
}

/// Column-wise ridge tracker: per column, the row of maximum vertically
/// smoothed intensity (refined to sub-pixel by a parabola through the peak)
/// if that maximum reaches the threshold.
pub fn ridge_track(frame: &Grid, utt_id: &str, frame_index: usize, params: RidgeParams) -> Result<TongueContour> {
    let (h, w) = (frame.height, frame.width);
    let mut points = Vec::new();
    let mut col = vec![0f32; h];
    for c in 0..w {
        for (r, slot) in col.iter_mut().enumerate() {
            let up = frame.at(r.saturating_sub(1), c);
            let down = frame.at((r + 1).min(h - 1), c);
            *slot = 0.25 * up + 0.5 * frame.at(r, c) + 0.25 * down;
        }
        let (best, &peak) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("frame has at least one row");
        if peak < params.threshold {
            continue;
        }
        let mut y = best as f64;
        if best > 0 && best + 1 < h {
            let (a, b, cc) = (f64::from(col[best - 1]), f64::from(peak), f64::from(col[best + 1]));
            let denom = a - 2.0 * b + cc;
            if denom < 0.0 {
                y += (0.5 * (a - cc) / denom).clamp(-0.5, 0.5);
            }
        }
        points.push([c as f64, y]);
    }
    if points.is_empty() {
        return Err(Error::invalid(format!(
            "{utt_id}#{frame_index}: no column reaches the ridge threshold"
        )));
    }
    Ok(TongueContour {
        utt_id: utt_id.to_string(),
        frame: frame_index,
        points,
    })
}

const HEADER: &str = "utt_id,frame,x,y";

pub fn write_contours_csv(path: &Path, contours: &[TongueContour]) -> Result<()> {
    let mut s = String::with_capacity(contours.len() * 32 * 24);
    s.push_str(HEADER);
    s.push('\n');
    for c in contours {
        for p in &c.points {
            let _ = writeln!(s, "{},{},{},{}", c.utt_id, c.frame, p[0], p[1]);
        }
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Reads contours, grouping consecutive rows with the same (utt_id, frame).
pub fn read_contours_csv(path: &Path) -> Result<Vec<TongueContour>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(Error::parse(path.display().to_string(), format!("expected header '{HEADER}'"))),
    }
    let mut out: Vec<TongueContour> = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let ctx = || format!("{}:{}", path.display(), i + 1);
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return Err(Error::parse(ctx(), format!("expected 4 fields, found {}", f.len())));
        }
        let frame: usize = f[1].parse().map_err(|_| Error::parse(ctx(), format!("bad frame '{}'", f[1])))?;
        let x: f64 = f[2].parse().map_err(|_| Error::parse(ctx(), format!("bad x '{}'", f[2])))?;
        let y: f64 = f[3].parse().map_err(|_| Error::parse(ctx(), format!("bad y '{}'", f[3])))?;
        match out.last_mut() {
            Some(c) if c.utt_id == f[0] && c.frame == frame => c.points.push([x, y]),
            _ => out.push(TongueContour {
                utt_id: f[0].to_string(),
                frame,
                points: vec![[x, y]],
            }),
        }
    }
    Ok(out)
}
