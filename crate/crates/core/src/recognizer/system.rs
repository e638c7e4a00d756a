use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::train::realign;
use super::{
    align, decode_viterbi, estimate_fmllr, estimate_lda, flat_start, init_from_alignments, train_em, wer,
    Alignment, BigramLm, DecodeParams, EmReport, EmSchedule, FeatureMatrix, FmllrOptions, FmllrStats,
    FmllrTransform, GmmHmmModel, Hypothesis, LdaTransform, Lexicon, WerCounts,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Raw,
    Fmllr,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Raw => "raw",
            FeatureKind::Fmllr => "fmllr",
        }
    }
}

impl std::fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(FeatureKind::Raw),
            "fmllr" => Ok(FeatureKind::Fmllr),
            _ => Err(Error::invalid(format!("unknown feature type '{s}' (expected raw or fmllr)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainUtterance {
    pub id: String,
    pub speaker: String,
    pub words: Vec<String>,
    pub feats: FeatureMatrix,
}

/// Test utterances carry their reference transcript for scoring.
pub type TestUtterance = TrainUtterance;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub var_floor_ratio: f64,
    pub mono: EmSchedule,
    /// Upper bound on the LDA output dimension; the effective value is also
    /// capped by the input dimension and the number of state classes − 1.
    pub lda_dim: usize,
    pub lda: EmSchedule,
    pub sat_iterations: usize,
    pub sat: EmSchedule,
    pub fmllr: FmllrOptions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            var_floor_ratio: 1e-3,
            mono: EmSchedule { iterations: 8, target_mixtures: 4, split_every: 2 },
            lda_dim: 40,
            lda: EmSchedule { iterations: 8, target_mixtures: 4, split_every: 2 },
            sat_iterations: 2,
            sat: EmSchedule { iterations: 3, target_mixtures: 4, split_every: 0 },
            fmllr: FmllrOptions::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub mono: EmReport,
    pub lda: EmReport,
    pub sat: Vec<EmReport>,
    pub fmllr: Vec<FmllrStats>,
}

/// LDA projection plus speaker-independent and speaker-adaptively trained
/// models over the projected features.
#[derive(Clone, Debug, PartialEq)]
pub struct AcousticSystem {
    pub lda: LdaTransform,
    pub si_model: GmmHmmModel,
    pub sat_model: GmmHmmModel,
    pub fmllr: FmllrOptions,
}

fn by_speaker(utts: &[TrainUtterance]) -> BTreeMap<&str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, u) in utts.iter().enumerate() {
        m.entry(u.speaker.as_str()).or_default().push(i);
    }
    m
}

/// Per-speaker fMLLR against `model`, in speaker order.
fn speaker_transforms(
    model: &GmmHmmModel,
    feats: &[FeatureMatrix],
    states: &[Vec<usize>],
    speakers: &BTreeMap<&str, Vec<usize>>,
    opts: &FmllrOptions,
) -> Result<Vec<(String, FmllrTransform, FmllrStats)>> {
    let groups: Vec<(&str, &Vec<usize>)> = speakers.iter().map(|(s, v)| (*s, v)).collect();
    groups
        .par_iter()
        .map(|(spk, idx)| {
            let f: Vec<&FeatureMatrix> = idx.iter().map(|&i| &feats[i]).collect();
            let a: Vec<Vec<usize>> = idx.iter().map(|&i| states[i].clone()).collect();
            let (t, st) = estimate_fmllr(model, &f, &a, spk, opts)?;
            Ok((spk.to_string(), t, st))
        })
        .collect()
}

impl AcousticSystem {
    /// Flat start → monophone EM → LDA → EM in LDA space → SAT rounds of
    /// per-speaker fMLLR and EM on the transformed features.
    pub fn train(
        phones: &[String],
        lexicon: &Lexicon,
        utts: &[TrainUtterance],
        cfg: &TrainConfig,
    ) -> Result<(Self, TrainReport)> {
        if utts.is_empty() {
            return Err(Error::invalid("no training utterances"));
        }
        let transcripts: Vec<Vec<u16>> = utts.iter().map(|u| lexicon.expand(&u.words)).collect::<Result<_>>()?;
        let feats: Vec<FeatureMatrix> = utts.iter().map(|u| u.feats.clone()).collect();
        let mut report = TrainReport::default();

        let (model, aligns) = flat_start(phones, &transcripts, &feats, cfg.var_floor_ratio)?;
        let (_, aligns, rep) = train_em(&model, &feats, &aligns, &cfg.mono)?;
        report.mono = rep;

        let labels: Vec<Vec<usize>> = aligns.iter().map(|a| a.states.clone()).collect();
        let n_classes = {
            let mut seen: Vec<usize> = labels.iter().flatten().copied().collect();
            seen.sort_unstable();
            seen.dedup();
            seen.len()
        };
        let d_out = cfg.lda_dim.min(feats[0].dim()).min(n_classes.saturating_sub(1)).max(1);
        let lda = estimate_lda(&feats, &labels, d_out)?;
        let projected: Vec<FeatureMatrix> = feats.par_iter().map(|f| lda.apply(f)).collect::<Result<_>>()?;

        let si_init = init_from_alignments(phones, &projected, &aligns, cfg.var_floor_ratio)?;
        let (si_model, si_aligns, rep) = train_em(&si_init, &projected, &aligns, &cfg.lda)?;
        report.lda = rep;

        let speakers = by_speaker(utts);
        let mut sat_model = si_model.clone();
        let mut sat_aligns = si_aligns;
        for _ in 0..cfg.sat_iterations {
            let states: Vec<Vec<usize>> = sat_aligns.iter().map(|a| a.states.clone()).collect();
            let transforms = speaker_transforms(&sat_model, &projected, &states, &speakers, &cfg.fmllr)?;
            let mut adapted: Vec<Option<FeatureMatrix>> = vec![None; utts.len()];
            for (spk, t, st) in transforms {
                for &i in &speakers[spk.as_str()] {
                    adapted[i] = Some(t.apply(&projected[i])?);
                }
                report.fmllr.push(st);
            }
            let adapted: Vec<FeatureMatrix> = adapted.into_iter().map(Option::unwrap).collect();
            let aligned = realign(&sat_model, &adapted, &sat_aligns)?;
            let (m, a, rep) = train_em(&sat_model, &adapted, &aligned, &cfg.sat)?;
            sat_model = m;
            sat_aligns = a;
            report.sat.push(rep);
        }
        Ok((Self { lda, si_model, sat_model, fmllr: cfg.fmllr.clone() }, report))
    }

    pub fn project(&self, feats: &FeatureMatrix) -> Result<FeatureMatrix> {
        self.lda.apply(feats)
    }

    pub fn model(&self, kind: FeatureKind) -> &GmmHmmModel {
        match kind {
            FeatureKind::Raw => &self.si_model,
            FeatureKind::Fmllr => &self.sat_model,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.si_model.save(&dir.join("si.gmhm"))?;
        self.sat_model.save(&dir.join("sat.gmhm"))?;
        write_json(&dir.join("lda.json"), &self.lda)?;
        write_json(&dir.join("fmllr_options.json"), &self.fmllr)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Self {
            lda: read_json(&dir.join("lda.json"))?,
            si_model: GmmHmmModel::load(&dir.join("si.gmhm"))?,
            sat_model: GmmHmmModel::load(&dir.join("sat.gmhm"))?,
            fmllr: read_json(&dir.join("fmllr_options.json"))?,
        })
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
}

/// Decoding of a test set with either feature type.
#[derive(Clone, Debug)]
pub struct SetDecode {
    pub hyps: Vec<Hypothesis>,
    pub counts: WerCounts,
    /// Per-speaker transforms (fMLLR decoding only).
    pub transforms: BTreeMap<String, FmllrTransform>,
    /// Features the final pass decoded, in the model's space.
    pub feats: Vec<FeatureMatrix>,
}

pub(crate) fn decode_all(
    model: &GmmHmmModel,
    lm: &BigramLm,
    lexicon: &Lexicon,
    feats: &[FeatureMatrix],
    params: &DecodeParams,
) -> Result<Vec<Hypothesis>> {
    feats.par_iter().map(|f| decode_viterbi(model, lm, lexicon, f, params)).collect()
}

pub fn score_set(utts: &[TestUtterance], hyps: &[Hypothesis]) -> Result<WerCounts> {
    let mut acc = WerCounts::default();
    for (u, h) in utts.iter().zip(hyps) {
        acc.add(&wer(&u.words, &h.words)?);
    }
    Ok(acc)
}

/// Aligns each utterance's hypothesis with `model` and estimates one
/// transform per speaker from the base features.
pub(crate) fn fmllr_from_hyps(
    model: &GmmHmmModel,
    lexicon: &Lexicon,
    base: &[FeatureMatrix],
    align_feats: &[FeatureMatrix],
    hyps: &[Hypothesis],
    utts: &[TestUtterance],
    opts: &FmllrOptions,
) -> Result<BTreeMap<String, FmllrTransform>> {
    let aligns: Vec<Alignment> = align_feats
        .par_iter()
        .zip(hyps)
        .map(|(f, h)| align(model, lexicon, f, &h.words))
        .collect::<Result<_>>()?;
    let states: Vec<Vec<usize>> = aligns.into_iter().map(|a| a.states).collect();
    let speakers = by_speaker(utts);
    Ok(speaker_transforms(model, base, &states, &speakers, opts)?
        .into_iter()
        .map(|(s, t, _)| (s, t))
        .collect())
}

pub(crate) fn apply_transforms(
    base: &[FeatureMatrix],
    utts: &[TestUtterance],
    transforms: &BTreeMap<String, FmllrTransform>,
) -> Result<Vec<FeatureMatrix>> {
    base.iter()
        .zip(utts)
        .map(|(f, u)| match transforms.get(&u.speaker) {
            Some(t) => t.apply(f),
            None => Ok(f.clone()),
        })
        .collect()
}

/// Decodes a test set. Raw decoding uses the speaker-independent model on
/// LDA features. fMLLR decoding takes a speaker-independent first pass,
/// aligns its hypotheses, estimates a transform per speaker against the SAT
/// model and decodes the transformed features with it.
pub fn decode_set(
    system: &AcousticSystem,
    lm: &BigramLm,
    lexicon: &Lexicon,
    utts: &[TestUtterance],
    kind: FeatureKind,
    params: &DecodeParams,
) -> Result<SetDecode> {
    let base: Vec<FeatureMatrix> = utts.par_iter().map(|u| system.project(&u.feats)).collect::<Result<_>>()?;
    let si_hyps = decode_all(&system.si_model, lm, lexicon, &base, params)?;
    match kind {
        FeatureKind::Raw => {
            let counts = score_set(utts, &si_hyps)?;
            Ok(SetDecode { hyps: si_hyps, counts, transforms: BTreeMap::new(), feats: base })
        }
        FeatureKind::Fmllr => {
            let transforms =
                fmllr_from_hyps(&system.sat_model, lexicon, &base, &base, &si_hyps, utts, &system.fmllr)?;
            let feats = apply_transforms(&base, utts, &transforms)?;
            let hyps = decode_all(&system.sat_model, lm, lexicon, &feats, params)?;
            let counts = score_set(utts, &hyps)?;
            Ok(SetDecode { hyps, counts, transforms, feats })
        }
    }
}
