use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trajectory::{gen_contour_trajectory, plan_utterance, render_pseudo_ultrasound, UtterancePlan};
use super::world::{SpeakerParams, World};
use super::{mode_stream, ModeEffects, SynthConfig};
use crate::articspace::{convex_hull, polygon_area, write_contours_csv, Point};
use crate::corpus::{
    save_manifest, split_prompt_disjoint, write_artf, write_labels, Dtype, FrameRef, Manifest, Mode, SplitOptions,
    UtteranceRecord,
};
use crate::error::{Error, Result};
use crate::recognizer::{Lexicon, TestUtterance, TrainUtterance};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UtteranceTruth {
    pub id: String,
    pub speaker: String,
    pub mode: Mode,
    pub prompt: String,
    pub phones: Vec<u16>,
    /// First frame of each phone segment.
    pub boundaries: Vec<usize>,
    pub n_frames: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeakerTruth {
    pub speaker: String,
    pub rate: f64,
    pub range: f64,
    pub offset: f64,
    /// Hull area of the jitter-free pooled contour points per mode.
    pub hull_area: BTreeMap<Mode, f64>,
    /// Hull area relative to modal speech.
    pub hull_area_ratio: BTreeMap<Mode, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub seed: u64,
    pub effects: BTreeMap<Mode, ModeEffects>,
    /// Planted speaking-rate ratio against modal speech.
    pub tempo_ratio: BTreeMap<Mode, f64>,
    /// Hull-area ratio a pure similarity contraction would give.
    pub contraction_area_ratio: BTreeMap<Mode, f64>,
    pub speakers: Vec<SpeakerTruth>,
    pub utterances: Vec<UtteranceTruth>,
}

#[derive(Clone, Debug)]
pub struct SynthOutput {
    pub manifest: Manifest,
    pub lexicon: Lexicon,
    pub truth: SynthTruth,
}

fn feature_rng(cfg: &SynthConfig, speaker: usize, mode: Mode, k: usize) -> crate::rng::Rng {
    seeded(cfg.seed, &[21, speaker as u64, mode_stream(mode), k as u64])
}

fn render_rng(cfg: &SynthConfig, speaker: usize, mode: Mode, k: usize) -> crate::rng::Rng {
    seeded(cfg.seed, &[22, speaker as u64, mode_stream(mode), k as u64])
}

fn plan_for(
    cfg: &SynthConfig,
    world: &World,
    spk: &SpeakerParams,
    mode: Mode,
    k: usize,
    prompt: &[String],
) -> Result<(UtterancePlan, crate::rng::Rng)> {
    let phones = world.lexicon.expand(prompt)?;
    let mut rng = World::utterance_rng(cfg, spk.index, mode, k);
    let plan = plan_utterance(cfg, spk, mode, &phones, &mut rng)?;
    Ok((plan, rng))
}

struct Produced {
    record: (String, String, Mode, String, u32, usize),
    labels: Vec<u16>,
    truth: UtteranceTruth,
}

fn write_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |e| Error::io(path, e)
}

/// Generates one speaker's productions in every mode, writing frames,
/// labels, contours and (optionally) features below `out`.
fn produce_speaker(
    cfg: &SynthConfig,
    world: &World,
    index: usize,
    out: &Path,
) -> Result<(Vec<Produced>, SpeakerTruth)> {
    let spk = world.speaker(cfg, index);
    let prompts = world.speaker_prompts(cfg, index);
    let clean_cfg = SynthConfig { contour_jitter: 0.0, ..cfg.clone() };
    let mut produced = vec![];
    let mut hull_area = BTreeMap::new();
    for &mode in &cfg.modes {
        let mut clean_points: Vec<Point> = vec![];
        for (k, prompt) in prompts.iter().enumerate() {
            let id = World::utterance_id(&spk, mode, k);
            let (plan, rng) = plan_for(cfg, world, &spk, mode, k, prompt)?;
            let mut clean_rng = rng.clone();
            let mut rng = rng;
            let contours = gen_contour_trajectory(cfg, world, &spk, mode, &plan, &id, &mut rng)?;
            let clean = gen_contour_trajectory(&clean_cfg, world, &spk, mode, &plan, &id, &mut clean_rng)?;
            clean_points.extend(clean.iter().flat_map(|c| c.points.iter().copied()));

            let mut rrng = render_rng(cfg, index, mode, k);
            let mut pixels = Vec::with_capacity(plan.n_frames() * cfg.frame_height * cfg.frame_width);
            for c in &contours {
                let g = render_pseudo_ultrasound(c, cfg.frame_height, cfg.frame_width, cfg.speckle_std, &mut rrng)?;
                pixels.extend(g.data.iter().map(|v| (v * 255.0).round()));
            }
            write_artf(&out.join(format!("ult/{id}.artf")), Dtype::U8, cfg.frame_height, cfg.frame_width, &pixels)?;
            let labels = plan.labels();
            write_labels(&out.join(format!("labels/{id}.lab")), &labels)?;
            write_contours_csv(&out.join(format!("contours/{id}.csv")), &contours)?;
            if cfg.direct_features {
                let f = world.features.sample(cfg, &spk, mode, &plan, &mut feature_rng(cfg, index, mode, k))?;
                f.write(&out.join(format!("feats/{id}.artf")))?;
            }
            let syllables = world.lexicon.syllables(prompt)?;
            let text = prompt.join(" ");
            produced.push(Produced {
                record: (id.clone(), spk.id.clone(), mode, text.clone(), syllables, plan.n_frames()),
                labels,
                truth: UtteranceTruth {
                    id,
                    speaker: spk.id.clone(),
                    mode,
                    prompt: text,
                    phones: plan.phones.clone(),
                    boundaries: plan.boundaries(),
                    n_frames: plan.n_frames(),
                },
            });
        }
        hull_area.insert(mode, polygon_area(&convex_hull(&clean_points)));
    }
    let modal = hull_area.get(&Mode::Modal).copied();
    let hull_area_ratio = hull_area
        .iter()
        .filter_map(|(&m, &a)| modal.map(|r| (m, a / r)))
        .collect();
    let truth = SpeakerTruth {
        speaker: spk.id.clone(),
        rate: spk.rate,
        range: spk.range,
        offset: spk.offset,
        hull_area,
        hull_area_ratio,
    };
    Ok((produced, truth))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
    fs::write(path, text + "\n").map_err(write_err(path))
}

/// Writes a complete corpus below `out`: `manifest.json`, `lexicon.txt`,
/// `truth.json`, `synth_config.json` and per-utterance files in `ult/`,
/// `labels/`, `contours/` and (with direct features) `feats/`. Records whose
/// prompt is one of the shared test prompts form the test split.
pub fn gen_corpus(cfg: &SynthConfig, out: &Path) -> Result<SynthOutput> {
    let world = World::new(cfg)?;
    fs::create_dir_all(out).map_err(write_err(out))?;
    info!(
        "generating {} speakers x {} utterances x {} modes into {}",
        cfg.n_speakers,
        cfg.utterances_per_speaker_per_mode,
        cfg.modes.len(),
        out.display()
    );
    let per_speaker: Vec<(Vec<Produced>, SpeakerTruth)> = (0..cfg.n_speakers)
        .into_par_iter()
        .map(|s| produce_speaker(cfg, &world, s, out))
        .collect::<Result<_>>()?;

    let mut records = vec![];
    let mut utterances = vec![];
    let mut speakers = vec![];
    for (produced, truth) in per_speaker {
        for p in produced {
            let (id, speaker, mode, prompt, syllables, n_frames) = p.record;
            let ult_path = PathBuf::from(format!("ult/{id}.artf"));
            let labels_path = PathBuf::from(format!("labels/{id}.lab"));
            records.push(UtteranceRecord {
                ultrasound: FrameRef::open(out, &ult_path)?,
                labels: Some(p.labels),
                id,
                speaker,
                session: "1".into(),
                mode,
                prompt,
                syllables,
                duration_s: n_frames as f64 / cfg.frame_rate,
                video: None,
                labels_path: Some(labels_path),
                split: None,
            });
            utterances.push(p.truth);
        }
        speakers.push(truth);
    }
    let manifest = Manifest {
        root: out.to_path_buf(),
        phones: world.phones.clone(),
        ult_fps: cfg.frame_rate,
        vid_fps: crate::corpus::DEFAULT_VID_FPS,
        records,
    };
    let test: HashSet<String> = world.test_prompts.iter().map(|p| p.join(" ")).collect();
    let manifest = if test.is_empty() {
        manifest
    } else {
        split_prompt_disjoint(manifest, &test, SplitOptions { validation_ratio: cfg.validation_ratio, seed: cfg.seed })?
    };
    manifest.validate()?;
    save_manifest(&manifest, &out.join("manifest.json"))?;
    world.lexicon.write(&out.join("lexicon.txt"), &world.phones)?;

    let tempo_ratio = cfg.modes.iter().map(|&m| Ok((m, cfg.effects(m)?.tempo))).collect::<Result<_>>()?;
    let contraction_area_ratio =
        cfg.modes.iter().map(|&m| Ok((m, cfg.effects(m)?.contraction.powi(2)))).collect::<Result<_>>()?;
    let truth = SynthTruth {
        seed: cfg.seed,
        effects: cfg.effects.clone(),
        tempo_ratio,
        contraction_area_ratio,
        speakers,
        utterances,
    };
    write_json(&out.join("truth.json"), &truth)?;
    write_json(&out.join("synth_config.json"), cfg)?;
    Ok(SynthOutput { manifest, lexicon: world.lexicon.clone(), truth })
}

/// In-memory recognizer data drawn from the Gaussian feature world.
#[derive(Clone, Debug)]
pub struct FeatureDataset {
    pub world: World,
    /// Training-prompt productions in the requested training modes.
    pub train: Vec<TrainUtterance>,
    /// Shared test-prompt productions per mode.
    pub test: BTreeMap<Mode, Vec<TestUtterance>>,
}

impl FeatureDataset {
    pub fn train_sentences(&self) -> Vec<Vec<String>> {
        self.train.iter().map(|u| u.words.clone()).collect()
    }
}

/// Same productions as [`gen_corpus`] writes to `feats/`, without rendering.
pub fn feature_dataset(cfg: &SynthConfig, train_modes: &[Mode]) -> Result<FeatureDataset> {
    let world = World::new(cfg)?;
    let per_speaker: Vec<Vec<(Mode, bool, TrainUtterance)>> = (0..cfg.n_speakers)
        .into_par_iter()
        .map(|s| {
            let spk = world.speaker(cfg, s);
            let prompts = world.speaker_prompts(cfg, s);
            let mut out = vec![];
            for &mode in &cfg.modes {
                for (k, prompt) in prompts.iter().enumerate() {
                    let is_test = k < world.test_prompts.len();
                    if !is_test && !train_modes.contains(&mode) {
                        continue;
                    }
                    let (plan, _) = plan_for(cfg, &world, &spk, mode, k, prompt)?;
                    let feats = world.features.sample(cfg, &spk, mode, &plan, &mut feature_rng(cfg, s, mode, k))?;
                    let utt = TrainUtterance {
                        id: World::utterance_id(&spk, mode, k),
                        speaker: spk.id.clone(),
                        words: prompt.clone(),
                        feats,
                    };
                    out.push((mode, is_test, utt));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut train = vec![];
    let mut test: BTreeMap<Mode, Vec<TestUtterance>> = BTreeMap::new();
    for (mode, is_test, u) in per_speaker.into_iter().flatten() {
        if is_test {
            test.entry(mode).or_default().push(u);
        } else {
            train.push(u);
        }
    }
    Ok(FeatureDataset { world, train, test })
}
