use std::collections::BTreeSet;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::{mode_stream, SynthConfig, UtterancePlan};
use crate::corpus::Mode;
use crate::error::Result;
use crate::recognizer::{FeatureMatrix, Lexicon, STATES_PER_PHONE};
use crate::rng::{seeded, Rng};

const VOWELS: &str = "aeiouy";
const CONSONANTS: &str = "ktsmnplrdgbfvzh";
const SUCCESSORS: usize = 4;
const BIGRAM_FLOOR: f64 = 0.02;

/// Contour shape parameters of one articulatory target: vertical shift,
/// front-back tilt and extra curvature, in pixels.
pub type Target = [f64; 3];

/// Corpus-wide inventory shared by all speakers.
#[derive(Clone, Debug)]
pub struct World {
    pub phones: Vec<String>,
    pub vowel: Vec<bool>,
    pub lexicon: Lexicon,
    /// Words in lexicon order; prompts index into this list.
    pub words: Vec<String>,
    /// Row-stochastic successor probabilities.
    pub bigram: Vec<Vec<f64>>,
    pub test_prompts: Vec<Vec<String>>,
    pub targets: Vec<Target>,
    pub features: FeatureWorld,
}

/// Per-speaker physiology.
#[derive(Clone, Debug, PartialEq)]
pub struct SpeakerParams {
    pub id: String,
    pub index: usize,
    /// Multiplier on phone durations.
    pub rate: f64,
    /// Multiplier on articulatory target displacements.
    pub range: f64,
    /// Vertical contour offset in pixels.
    pub offset: f64,
    /// Additive feature offset.
    pub feature_offset: Vec<f64>,
}

fn phone_names(n: usize) -> (Vec<String>, Vec<bool>) {
    let n_vowels = (n / 2).max(1);
    let single = n_vowels <= VOWELS.len() && n - n_vowels <= CONSONANTS.len();
    (0..n)
        .map(|i| {
            let vowel = i < n_vowels;
            let name = if single {
                let set = if vowel { VOWELS } else { CONSONANTS };
                let j = if vowel { i } else { i - n_vowels };
                set[j..j + 1].to_string()
            } else if vowel {
                format!("v{i}")
            } else {
                format!("c{i}")
            };
            (name, vowel)
        })
        .unzip()
}

fn sample_prompt(cfg: &SynthConfig, words: &[String], bigram: &[Vec<f64>], rng: &mut Rng) -> Vec<String> {
    let [lo, hi] = cfg.prompt_words;
    let len = rng.random_range(lo..=hi);
    let mut w = rng.random_range(0..words.len());
    let mut out = vec![words[w].clone()];
    while out.len() < len {
        let u: f64 = rng.random();
        let row = &bigram[w];
        let mut acc = 0.0;
        w = row.len() - 1;
        for (j, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                w = j;
                break;
            }
        }
        out.push(words[w].clone());
    }
    out
}

impl World {
    pub fn new(cfg: &SynthConfig) -> Result<Self> {
        cfg.validate()?;
        let (phones, vowel) = phone_names(cfg.n_phones);
        let single = phones.iter().all(|p| p.len() == 1);
        let vowels: Vec<u16> = (0..cfg.n_phones as u16).filter(|&p| vowel[p as usize]).collect();

        let mut rng = seeded(cfg.seed, &[1]);
        let mut seen = BTreeSet::new();
        let mut lexicon = Lexicon::default();
        let mut words = vec![];
        let mut attempts = 0;
        while words.len() < cfg.n_words {
            attempts += 1;
            if attempts > 100_000 {
                return Err(crate::Error::invalid(format!(
                    "cannot draw {} distinct words from {} phones",
                    cfg.n_words, cfg.n_phones
                )));
            }
            let len = rng.random_range(1..=4usize);
            let mut seq: Vec<u16> = (0..len).map(|_| rng.random_range(0..cfg.n_phones as u16)).collect();
            if !seq.iter().any(|&p| vowel[p as usize]) {
                let i = rng.random_range(0..len);
                seq[i] = *vowels.choose(&mut rng).expect("at least one vowel");
            }
            if !seen.insert(seq.clone()) {
                continue;
            }
            let sep = if single { "" } else { "-" };
            let name: Vec<&str> = seq.iter().map(|&p| phones[p as usize].as_str()).collect();
            let name = name.join(sep);
            let syllables = seq.iter().filter(|&&p| vowel[p as usize]).count() as u32;
            lexicon.insert(name.clone(), seq, syllables);
            words.push(name);
        }
        words.sort();

        let mut rng = seeded(cfg.seed, &[2]);
        let n = words.len();
        let bigram: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut row = vec![BIGRAM_FLOOR; n];
                for j in rand::seq::index::sample(&mut rng, n, SUCCESSORS.min(n)) {
                    row[j] += rng.random_range(0.2..1.0);
                }
                let s: f64 = row.iter().sum();
                row.into_iter().map(|v| v / s).collect()
            })
            .collect();

        let mut rng = seeded(cfg.seed, &[3]);
        let mut test_prompts: Vec<Vec<String>> = vec![];
        while test_prompts.len() < cfg.test_prompts {
            let p = sample_prompt(cfg, &words, &bigram, &mut rng);
            if !test_prompts.contains(&p) {
                test_prompts.push(p);
            }
        }

        let h = cfg.frame_height as f64;
        let mut rng = seeded(cfg.seed, &[4]);
        let targets = (0..cfg.n_phones)
            .map(|_| {
                [
                    rng.random_range(-0.1..0.1) * h,
                    rng.random_range(-0.06..0.06) * h,
                    rng.random_range(-0.09..0.09) * h,
                ]
            })
            .collect();

        let features = FeatureWorld::new(cfg);
        Ok(Self { phones, vowel, lexicon, words, bigram, test_prompts, targets, features })
    }

    /// Prompt list of one speaker: the shared test prompts followed by
    /// speaker-specific training prompts that never equal a test prompt.
    pub fn speaker_prompts(&self, cfg: &SynthConfig, speaker: usize) -> Vec<Vec<String>> {
        let mut rng = seeded(cfg.seed, &[30, speaker as u64]);
        let mut out = self.test_prompts.clone();
        while out.len() < cfg.utterances_per_speaker_per_mode {
            let p = sample_prompt(cfg, &self.words, &self.bigram, &mut rng);
            if !self.test_prompts.contains(&p) {
                out.push(p);
            }
        }
        out
    }

    pub fn speaker(&self, cfg: &SynthConfig, index: usize) -> SpeakerParams {
        let mut rng = seeded(cfg.seed, &[10, index as u64]);
        let std = Normal::new(0.0, 1.0).expect("unit normal");
        let rate = (cfg.rate_variability * std.sample(&mut rng)).exp();
        let range = (cfg.range_variability * std.sample(&mut rng)).exp().clamp(0.7, 1.4);
        let offset = (cfg.speaker_variability * std.sample(&mut rng)).clamp(-1.5, 1.5);
        let feature_offset = (0..cfg.feature_dim)
            .map(|_| cfg.feature_speaker_std * cfg.feature_noise * std.sample(&mut rng))
            .collect();
        SpeakerParams { id: format!("s{index:02}"), index, rate, range, offset, feature_offset }
    }

    pub fn utterance_id(speaker: &SpeakerParams, mode: Mode, k: usize) -> String {
        format!("{}_{}_{k:03}", speaker.id, mode.as_str())
    }

    /// Generator of utterance `k` of a speaker in a mode.
    pub fn utterance_rng(cfg: &SynthConfig, speaker: usize, mode: Mode, k: usize) -> Rng {
        seeded(cfg.seed, &[20, speaker as u64, mode_stream(mode), k as u64])
    }
}

/// Gaussian emissions per phone state, bypassing image rendering.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWorld {
    pub dim: usize,
    pub noise: f64,
    /// Mean of state `phone * 3 + k`.
    pub means: Vec<Vec<f64>>,
    pub centroid: Vec<f64>,
}

impl FeatureWorld {
    pub fn new(cfg: &SynthConfig) -> Self {
        let mut rng = seeded(cfg.seed, &[5]);
        let d = Normal::new(0.0, cfg.feature_separation.max(0.0)).expect("valid std");
        let means: Vec<Vec<f64>> = (0..cfg.n_phones * STATES_PER_PHONE)
            .map(|_| (0..cfg.feature_dim).map(|_| d.sample(&mut rng)).collect())
            .collect();
        let n = means.len() as f64;
        let centroid = (0..cfg.feature_dim).map(|i| means.iter().map(|m| m[i]).sum::<f64>() / n).collect();
        Self { dim: cfg.feature_dim, noise: cfg.feature_noise, means, centroid }
    }

    /// One feature vector per planned frame: the state mean contracted about
    /// the centroid, shifted by the mode offset and the speaker offset, plus
    /// isotropic noise.
    pub fn sample(
        &self,
        cfg: &SynthConfig,
        speaker: &SpeakerParams,
        mode: Mode,
        plan: &UtterancePlan,
        rng: &mut Rng,
    ) -> Result<FeatureMatrix> {
        let e = cfg.effects(mode)?;
        let shift = e.shift_vector(self.dim)?;
        let noise = Normal::new(0.0, self.noise).expect("positive noise");
        let states = plan.state_labels();
        let mut data = Vec::with_capacity(states.len() * self.dim);
        for s in states {
            let mu = &self.means[s];
            for i in 0..self.dim {
                let c = self.centroid[i];
                let v = c + e.contraction * (mu[i] - c) + shift[i] * self.noise + speaker.feature_offset[i];
                data.push(v + noise.sample(rng));
            }
        }
        FeatureMatrix::new(self.dim, data)
    }
}
