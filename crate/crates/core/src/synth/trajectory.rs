use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::world::{SpeakerParams, Target, World};
use super::SynthConfig;
use crate::articspace::TongueContour;
use crate::corpus::{Grid, Mode};
use crate::error::{Error, Result};
use crate::recognizer::STATES_PER_PHONE;
use crate::rng::Rng;

/// Width in pixels of the rendered tongue-surface ridge.
pub const RIDGE_SIGMA: f64 = 2.0;

/// Phone segmentation of one production.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtterancePlan {
    pub phones: Vec<u16>,
    /// Frames per phone segment.
    pub frames: Vec<usize>,
}

impl UtterancePlan {
    pub fn n_frames(&self) -> usize {
        self.frames.iter().sum()
    }

    /// First frame of every segment.
    pub fn boundaries(&self) -> Vec<usize> {
        self.frames
            .iter()
            .scan(0, |acc, &n| {
                let start = *acc;
                *acc += n;
                Some(start)
            })
            .collect()
    }

    pub fn labels(&self) -> Vec<u16> {
        self.phones
            .iter()
            .zip(&self.frames)
            .flat_map(|(&p, &n)| std::iter::repeat_n(p, n))
            .collect()
    }

    /// HMM state per frame: each segment is divided into three near-equal
    /// thirds.
    pub fn state_labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n_frames());
        for (&p, &n) in self.phones.iter().zip(&self.frames) {
            for j in 0..n {
                out.push(p as usize * STATES_PER_PHONE + j * STATES_PER_PHONE / n);
            }
        }
        out
    }
}

/// Draws segment durations: base length `phone_frames × speaker rate ×
/// log-normal noise` (at least 3 frames), then `⌈base / tempo⌉` frames.
pub fn plan_utterance(
    cfg: &SynthConfig,
    speaker: &SpeakerParams,
    mode: Mode,
    phones: &[u16],
    rng: &mut Rng,
) -> Result<UtterancePlan> {
    if phones.is_empty() {
        return Err(Error::invalid("cannot plan an utterance without phones"));
    }
    let tempo = cfg.effects(mode)?.tempo;
    let sd = cfg.duration_cv;
    let noise = Normal::new(-0.5 * sd * sd, sd).expect("finite std");
    let frames = phones
        .iter()
        .map(|_| {
            let base = (cfg.phone_frames * speaker.rate * noise.sample(rng).exp()).max(STATES_PER_PHONE as f64);
            (base / tempo).ceil() as usize
        })
        .collect();
    Ok(UtterancePlan { phones: phones.to_vec(), frames })
}

struct Geometry {
    xc: f64,
    half_width: f64,
    yc: f64,
    arch_top: f64,
    arch_depth: f64,
    columns: Vec<f64>,
}

impl Geometry {
    fn new(cfg: &SynthConfig) -> Self {
        let (h, w) = (cfg.frame_height as f64, cfg.frame_width as f64);
        let xc = (w - 1.0) / 2.0;
        let half_width = 0.8 * xc;
        let first = (xc - half_width).ceil() as usize;
        let last = (xc + half_width).floor() as usize;
        let columns: Vec<f64> = (first..=last).step_by(cfg.contour_step).map(|c| c as f64).collect();
        let arch_top = 0.4 * h;
        let arch_depth = 0.2 * h;
        let yc = columns
            .iter()
            .map(|&x| arch_top + arch_depth * ((x - xc) / half_width).powi(2))
            .sum::<f64>()
            / columns.len() as f64;
        Self { xc, half_width, yc, arch_top, arch_depth, columns }
    }
}

fn lerp(a: &Target, b: &Target, t: f64) -> Target {
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]
}

/// Contours of every planned frame. A frame's shape moves linearly from the
/// previous phone's target to the current one over the first half of the
/// segment and then holds. The shape relative to the arch centroid (base
/// arch, phone deformation scaled by the speaker's range, speaker offset) is
/// scaled by the mode's contraction; vertical jitter is added last.
pub fn gen_contour_trajectory(
    cfg: &SynthConfig,
    world: &World,
    speaker: &SpeakerParams,
    mode: Mode,
    plan: &UtterancePlan,
    utt_id: &str,
    rng: &mut Rng,
) -> Result<Vec<TongueContour>> {
    let c = cfg.effects(mode)?.contraction;
    let g = Geometry::new(cfg);
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let y_max = (cfg.frame_height - 1) as f64;
    let mut out = Vec::with_capacity(plan.n_frames());
    let mut prev = world.targets[plan.phones[0] as usize];
    for (&p, &n) in plan.phones.iter().zip(&plan.frames) {
        let target = world.targets[p as usize];
        for j in 0..n {
            let t = (2.0 * (j + 1) as f64 / n as f64).min(1.0);
            let [dy, tilt, curv] = lerp(&prev, &target, t);
            let points = g
                .columns
                .iter()
                .map(|&x| {
                    let u = (x - g.xc) / g.half_width;
                    let arch = g.arch_top + g.arch_depth * u * u - g.yc;
                    let deform = speaker.range * (dy + tilt * u + curv * (u * u - 1.0 / 3.0)) + speaker.offset;
                    let y = g.yc + c * (arch + deform) + cfg.contour_jitter * jitter.sample(rng);
                    [g.xc + c * (x - g.xc), y.clamp(0.0, y_max)]
                })
                .collect();
            out.push(TongueContour { utt_id: utt_id.to_string(), frame: out.len(), points });
        }
        prev = target;
    }
    Ok(out)
}

/// Bright Gaussian ridge along the contour on a black background, with
/// multiplicative speckle, clipped to [0, 1]. Columns outside the contour's
/// horizontal extent stay black.
pub fn render_pseudo_ultrasound(
    contour: &TongueContour,
    height: usize,
    width: usize,
    noise_std: f64,
    rng: &mut Rng,
) -> Result<Grid> {
    contour.validate(height, width)?;
    let pts = &contour.points;
    if pts.windows(2).any(|w| w[1][0] <= w[0][0]) {
        return Err(Error::invalid(format!(
            "contour {}#{} is not ordered left to right",
            contour.utt_id, contour.frame
        )));
    }
    let speckle = Normal::new(0.0, 1.0).expect("unit normal");
    let inv = 1.0 / (2.0 * RIDGE_SIGMA * RIDGE_SIGMA);
    let mut data = vec![0f32; height * width];
    let mut seg = 0;
    for col in 0..width {
        let x = col as f64;
        if x < pts[0][0] || x > pts[pts.len() - 1][0] {
            continue;
        }
        while seg + 2 < pts.len() && pts[seg + 1][0] < x {
            seg += 1;
        }
        let (a, b) = (pts[seg], pts[seg + 1]);
        let y = a[1] + (x - a[0]) / (b[0] - a[0]) * (b[1] - a[1]);
        for row in 0..height {
            let d = row as f64 - y;
            data[row * width + col] = (-d * d * inv).exp() as f32;
        }
    }
    if noise_std > 0.0 {
        for v in &mut data {
            *v = (f64::from(*v) * (1.0 + noise_std * speckle.sample(rng))).clamp(0.0, 1.0) as f32;
        }
    }
    Grid::new(height, width, data)
}
