//! Synthetic corpora with planted speaking-mode effects.
//!
//! Every utterance is generated from a per-frame phone plan. The plan drives
//! three views of the same production: tongue contours (for the
//! articulatory-space analysis), pseudo-ultrasound frames rendered from those
//! contours (for the feature network), and directly sampled Gaussian
//! features (for recognizer experiments that bypass the network).

mod corpus;
mod trajectory;
mod world;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Mode;
use crate::error::{Error, Result};

pub use corpus::{
    feature_dataset, gen_corpus, FeatureDataset, SpeakerTruth, SynthOutput, SynthTruth, UtteranceTruth,
};
pub use trajectory::{gen_contour_trajectory, plan_utterance, render_pseudo_ultrasound, UtterancePlan, RIDGE_SIGMA};
pub use world::{FeatureWorld, SpeakerParams, World};

/// Planted effects of one speaking mode relative to modal speech.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeEffects {
    /// Articulation speed; segment durations are divided by it.
    pub tempo: f64,
    /// Scale of articulator displacement about the resting centroid.
    pub contraction: f64,
    /// Additive feature offset in units of the feature noise std. Empty
    /// means none; a single value applies to every dimension.
    #[serde(default)]
    pub feature_shift: Vec<f64>,
}

impl ModeEffects {
    pub fn neutral() -> Self {
        Self { tempo: 1.0, contraction: 1.0, feature_shift: vec![] }
    }

    pub fn shift_vector(&self, dim: usize) -> Result<Vec<f64>> {
        match self.feature_shift.len() {
            0 => Ok(vec![0.0; dim]),
            1 => Ok(vec![self.feature_shift[0]; dim]),
            n if n == dim => Ok(self.feature_shift.clone()),
            n => Err(Error::invalid(format!("feature shift has {n} values for {dim} dimensions"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_speakers: usize,
    pub utterances_per_speaker_per_mode: usize,
    /// Prompts shared by every speaker and mode; these form the test sets.
    pub test_prompts: usize,
    pub modes: Vec<Mode>,
    pub n_phones: usize,
    pub n_words: usize,
    /// Inclusive range of words per prompt.
    pub prompt_words: [usize; 2],
    pub effects: BTreeMap<Mode, ModeEffects>,
    /// Std of the per-speaker vertical contour offset, in pixels.
    pub speaker_variability: f64,
    /// Std of the per-speaker log articulatory range.
    pub range_variability: f64,
    /// Std of the per-speaker log speaking rate.
    pub rate_variability: f64,
    /// Mean modal phone duration in frames before rounding up.
    pub phone_frames: f64,
    /// Log-normal spread of individual phone durations.
    pub duration_cv: f64,
    pub speckle_std: f64,
    /// Std of the vertical per-point contour noise, in pixels.
    pub contour_jitter: f64,
    /// Column spacing of contour points.
    pub contour_step: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub frame_rate: f64,
    pub feature_dim: usize,
    pub feature_noise: f64,
    /// Std of the phone-state feature means.
    pub feature_separation: f64,
    /// Std of the per-speaker feature offset, in units of the feature noise.
    pub feature_speaker_std: f64,
    /// Also write directly sampled features next to the frames.
    pub direct_features: bool,
    pub validation_ratio: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl SynthConfig {
    /// 30 speakers × 20 utterances × {modal, silent}, 16×32 frames, 8 phones,
    /// 20 words. Silent speech is slower (0.85), contracted (0.9) and shifted
    /// by half a noise std in feature space.
    pub fn desk() -> Self {
        let mut effects = BTreeMap::new();
        effects.insert(Mode::Modal, ModeEffects::neutral());
        effects.insert(Mode::Silent, ModeEffects { tempo: 0.85, contraction: 0.9, feature_shift: vec![0.5] });
        Self {
            n_speakers: 30,
            utterances_per_speaker_per_mode: 20,
            test_prompts: 5,
            modes: vec![Mode::Modal, Mode::Silent],
            n_phones: 8,
            n_words: 20,
            prompt_words: [3, 6],
            effects,
            speaker_variability: 0.4,
            range_variability: 0.1,
            rate_variability: 0.1,
            phone_frames: 7.0,
            duration_cv: 0.25,
            speckle_std: 0.15,
            contour_jitter: 0.3,
            contour_step: 2,
            frame_height: 16,
            frame_width: 32,
            frame_rate: crate::corpus::DEFAULT_ULT_FPS,
            feature_dim: 12,
            feature_noise: 1.0,
            feature_separation: 0.5,
            feature_speaker_std: 0.15,
            direct_features: true,
            validation_ratio: 0.1,
            seed: 0,
        }
    }

    /// Corpus-sized counterpart of [`desk`](Self::desk): 82 speakers,
    /// 64×128 frames, 49 phones and a 200-word vocabulary.
    pub fn full() -> Self {
        Self {
            n_speakers: 82,
            utterances_per_speaker_per_mode: 40,
            test_prompts: 10,
            n_phones: 49,
            n_words: 200,
            frame_height: 64,
            frame_width: 128,
            contour_step: 4,
            ..Self::desk()
        }
    }

    /// Every mode neutral: the null world for calibration checks.
    pub fn without_effects(mut self) -> Self {
        for e in self.effects.values_mut() {
            *e = ModeEffects::neutral();
        }
        self
    }

    pub fn effects(&self, mode: Mode) -> Result<&ModeEffects> {
        self.effects
            .get(&mode)
            .ok_or_else(|| Error::invalid(format!("no effects configured for mode {mode}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_speakers == 0 || self.utterances_per_speaker_per_mode == 0 {
            return Err(Error::invalid("need at least one speaker and one utterance"));
        }
        if self.test_prompts > self.utterances_per_speaker_per_mode {
            return Err(Error::invalid(format!(
                "{} test prompts exceed {} utterances per speaker and mode",
                self.test_prompts, self.utterances_per_speaker_per_mode
            )));
        }
        if self.modes.is_empty() {
            return Err(Error::invalid("no speaking modes to generate"));
        }
        if self.n_phones < 2 || self.n_words < 2 {
            return Err(Error::invalid("need at least 2 phones and 2 words"));
        }
        let [lo, hi] = self.prompt_words;
        if lo == 0 || lo > hi {
            return Err(Error::invalid(format!("bad prompt length range [{lo}, {hi}]")));
        }
        for &m in &self.modes {
            let e = self.effects(m)?;
            if !(e.tempo > 0.0 && e.contraction > 0.0 && e.tempo.is_finite() && e.contraction.is_finite()) {
                return Err(Error::invalid(format!("mode {m}: tempo and contraction must be positive")));
            }
            e.shift_vector(self.feature_dim)?;
        }
        if let Some(e) = self.effects.get(&Mode::Modal) {
            if e.tempo != 1.0 || e.contraction != 1.0 || e.feature_shift.iter().any(|&v| v != 0.0) {
                return Err(Error::invalid("modal effects must be exactly neutral"));
            }
        }
        let nonneg = [
            ("speaker_variability", self.speaker_variability),
            ("range_variability", self.range_variability),
            ("rate_variability", self.rate_variability),
            ("duration_cv", self.duration_cv),
            ("speckle_std", self.speckle_std),
            ("contour_jitter", self.contour_jitter),
            ("feature_speaker_std", self.feature_speaker_std),
        ];
        if let Some((name, v)) = nonneg.iter().find(|(_, v)| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(format!("{name} must be non-negative, got {v}")));
        }
        if !(self.phone_frames >= 3.0) {
            return Err(Error::invalid("phone_frames must be at least 3 (one frame per HMM state)"));
        }
        if self.frame_height < 8 || self.frame_width < 8 || self.contour_step == 0 {
            return Err(Error::invalid("frames must be at least 8x8 and contour_step positive"));
        }
        if !(self.frame_rate > 0.0) || self.feature_dim == 0 || !(self.feature_noise > 0.0) {
            return Err(Error::invalid("frame rate, feature dimension and feature noise must be positive"));
        }
        if !(0.0..1.0).contains(&self.validation_ratio) {
            return Err(Error::invalid("validation_ratio must lie in [0, 1)"));
        }
        Ok(())
    }
}

pub(crate) fn mode_stream(m: Mode) -> u64 {
    match m {
        Mode::Modal => 0,
        Mode::Silent => 1,
        Mode::Whispered => 2,
    }
}
