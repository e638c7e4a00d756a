use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ssi_core::articspace::{
    articulatory_space, read_contours_csv, ridge_track, write_hull_csv, write_speaker_svgs, RidgeParams, SpaceParams,
    TongueContour,
};
use ssi_core::corpus::{load_manifest, Manifest, Mode, NormStats, Split, UtteranceRecord};
use ssi_core::featnet::{
    extract_bottleneck, init_params, load_checkpoint, prepare_frames, save_checkpoint, train_sgd, SampleSet,
};
use ssi_core::recognizer::{
    adapt_unsupervised, decode_set, AcousticSystem, AdaptStrategy, BigramLm, FeatureMatrix, Hypothesis, Lexicon,
    TestUtterance, TrainUtterance, WerCounts,
};
use ssi_core::stats::{mode_comparison_report, ReportInputs};
use ssi_core::synth::gen_corpus;

use crate::config::{write_run_json, AdaptChoice, RunConfig};

const FEATNET_CKPT: &str = "featnet.ckpt";

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?).map_err(|e| ssi_core::Error::io(path, e))?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let s = fs::read_to_string(path).map_err(|e| ssi_core::Error::io(path, e))?;
    Ok(serde_json::from_str(&s).map_err(|e| ssi_core::Error::parse(path.display().to_string(), e.to_string()))?)
}

fn open_corpus(cfg: &RunConfig) -> Result<(Manifest, Lexicon)> {
    let root = cfg.require("corpus")?;
    let m = load_manifest(&root.join("manifest.json"))?;
    let lex = Lexicon::read(&root.join("lexicon.txt"), &m.phones)?;
    Ok((m, lex))
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let out = cfg.require("out")?.to_path_buf();
    write_run_json(&out, cfg)?;
    Ok(out)
}

fn words(r: &UtteranceRecord) -> Vec<String> {
    r.words().into_iter().map(str::to_string).collect()
}

fn training_records<'a>(cfg: &RunConfig, m: &'a Manifest, splits: &[Split]) -> Vec<&'a UtteranceRecord> {
    m.records
        .iter()
        .filter(|r| cfg.train_modes.contains(&r.mode) && r.split.is_some_and(|s| splits.contains(&s)))
        .collect()
}

fn test_modes(m: &Manifest) -> Vec<Mode> {
    let modes: BTreeSet<Mode> = m.with_split(Split::Test).map(|r| r.mode).collect();
    modes.into_iter().collect()
}

fn load_feats(dir: &Path, id: &str) -> Result<FeatureMatrix> {
    Ok(FeatureMatrix::read(&dir.join(format!("{id}.artf")))?)
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    let sc = cfg.synth_config();
    let res = gen_corpus(&sc, &out)?;
    info!("wrote {} utterances to {}", res.manifest.records.len(), out.display());
    Ok(())
}

pub fn train_featnet(cfg: &RunConfig) -> Result<()> {
    let (m, _) = open_corpus(cfg)?;
    let out = out_dir(cfg)?;
    let mut fc = cfg.featnet_config();
    fc.n_classes = m.phones.len();
    let train = training_records(cfg, &m, &[Split::Train]);
    let valid = training_records(cfg, &m, &[Split::Validation]);
    if train.is_empty() || valid.is_empty() {
        bail!(ssi_core::Error::invalid("feature network needs training and validation utterances"));
    }
    let seqs: Vec<_> = train.iter().map(|r| m.ultrasound(r)).collect::<ssi_core::Result<_>>()?;
    fc.normalization = Some(NormStats::fit(seqs.iter().flat_map(|s| s.frames()).collect::<Vec<_>>())?);
    let build = |recs: &[&UtteranceRecord]| -> Result<SampleSet> {
        let mut set = SampleSet::new(fc.input_shape[1] * fc.input_shape[2]);
        for (i, r) in recs.iter().enumerate() {
            let frames = prepare_frames(&*m.ultrasound(r)?, &fc)?;
            let labels = r
                .labels
                .as_ref()
                .ok_or_else(|| ssi_core::Error::invalid(format!("utterance {} has no phone labels", r.id)))?;
            set.add_utterance(&frames, labels, cfg.featnet_stride, i)?;
        }
        Ok(set)
    };
    let (train_set, valid_set) = (build(&train)?, build(&valid)?);
    info!("featnet: {} training and {} validation samples", train_set.len(), valid_set.len());
    let init = init_params(&fc, fc.seed)?;
    let (params, history) = train_sgd(&init, &fc, &train_set, &valid_set)?;
    save_checkpoint(&out.join(FEATNET_CKPT), &fc, &params)?;
    write_json(&out.join("featnet_history.json"), &history)?;
    Ok(())
}

pub fn extract_features(cfg: &RunConfig) -> Result<()> {
    let (m, _) = open_corpus(cfg)?;
    let model = cfg.require("model")?;
    let out = out_dir(cfg)?;
    let (fc, params) = load_checkpoint(&model.join(FEATNET_CKPT))?;
    m.records.par_iter().try_for_each(|r| -> Result<()> {
        let frames = prepare_frames(&*m.ultrasound(r)?, &fc)?;
        let feats = extract_bottleneck(&params, &fc, &frames)?;
        feats.write(&out.join(format!("{}.artf", r.id)))?;
        Ok(())
    })?;
    info!("extracted {}-dim features for {} utterances", fc.bottleneck_dim(), m.records.len());
    Ok(())
}

pub fn train_am(cfg: &RunConfig) -> Result<()> {
    let (m, lex) = open_corpus(cfg)?;
    let feats = cfg.feats_dir()?;
    let out = out_dir(cfg)?;
    let recs = training_records(cfg, &m, &[Split::Train, Split::Validation]);
    let utts: Vec<TrainUtterance> = recs
        .par_iter()
        .map(|r| {
            Ok(TrainUtterance { id: r.id.clone(), speaker: r.speaker.clone(), words: words(r), feats: load_feats(&feats, &r.id)? })
        })
        .collect::<Result<_>>()?;
    let sentences: Vec<Vec<String>> = utts.iter().map(|u| u.words.clone()).collect();
    let lm = BigramLm::train_with_vocab(&sentences, lex.words())?;
    let (system, report) = AcousticSystem::train(&m.phones, &lex, &utts, &cfg.am_config())?;
    system.save(&out.join("am"))?;
    lm.save(&out.join("lm.json"))?;
    write_json(&out.join("am_report.json"), &report)?;
    info!("acoustic model trained on {} utterances", utts.len());
    Ok(())
}

/// Outcome of one decode or adapt run on one test set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SetResult {
    pub mode: Mode,
    pub features: String,
    pub adaptation: String,
    pub pass1: WerCounts,
    pub pass2: Option<WerCounts>,
    /// Final-pass WER per speaker.
    pub speaker_wer: BTreeMap<String, f64>,
}

impl SetResult {
    pub fn final_counts(&self) -> WerCounts {
        self.pass2.unwrap_or(self.pass1)
    }

    pub fn file_name(mode: Mode, features: &str, adaptation: &str) -> String {
        format!("wer_{mode}_{features}_{adaptation}.json")
    }
}

fn speaker_wer(utts: &[TestUtterance], hyps: &[Hypothesis]) -> Result<BTreeMap<String, f64>> {
    let mut acc: BTreeMap<String, WerCounts> = BTreeMap::new();
    for (u, h) in utts.iter().zip(hyps) {
        acc.entry(u.speaker.clone()).or_default().add(&ssi_core::recognizer::wer(&u.words, &h.words)?);
    }
    Ok(acc.into_iter().map(|(k, c)| (k, c.wer())).collect())
}

fn write_hyps(path: &Path, utts: &[TestUtterance], hyps: &[Hypothesis]) -> Result<()> {
    let mut s = String::new();
    for (u, h) in utts.iter().zip(hyps) {
        let _ = writeln!(s, "{}\t{}", u.id, h.words.join(" "));
    }
    fs::write(path, s).map_err(|e| ssi_core::Error::io(path, e))?;
    Ok(())
}

/// Shared by `decode` (no adaptation) and `adapt`.
pub fn decode(cfg: &RunConfig, adapt: AdaptChoice) -> Result<()> {
    let (m, lex) = open_corpus(cfg)?;
    let model = cfg.require("model")?;
    let feats = cfg.feats_dir()?;
    let out = out_dir(cfg)?;
    let system = AcousticSystem::load(&model.join("am"))?;
    let lm = BigramLm::load(&model.join("lm.json"))?;
    let kind = cfg.features;
    for mode in test_modes(&m) {
        let utts: Vec<TestUtterance> = m
            .with_split(Split::Test)
            .filter(|r| r.mode == mode)
            .map(|r| {
                Ok(TrainUtterance { id: r.id.clone(), speaker: r.speaker.clone(), words: words(r), feats: load_feats(&feats, &r.id)? })
            })
            .collect::<Result<_>>()?;
        let (pass1, pass2, hyps) = match adapt {
            AdaptChoice::None => {
                let d = decode_set(&system, &lm, &lex, &utts, kind, &cfg.decode)?;
                (d.counts, None, d.hyps)
            }
            AdaptChoice::Fmllr | AdaptChoice::Map => {
                let strategy =
                    if adapt == AdaptChoice::Map { AdaptStrategy::Map { tau: cfg.map_tau } } else { AdaptStrategy::Fmllr };
                let o = adapt_unsupervised(&system, &lm, &lex, &utts, kind, strategy, cfg.adapt_iterations, &cfg.decode)?;
                (o.pass1.counts, Some(o.pass2.counts), o.pass2.hyps)
            }
        };
        let res = SetResult {
            mode,
            features: kind.to_string(),
            adaptation: adapt.as_str().into(),
            pass1,
            pass2,
            speaker_wer: speaker_wer(&utts, &hyps)?,
        };
        info!("{mode} {kind} adapt={}: WER {:.2}%", adapt.as_str(), 100.0 * res.final_counts().wer());
        write_hyps(&out.join(format!("hyp_{mode}_{kind}_{}.txt", adapt.as_str())), &utts, &hyps)?;
        write_json(&out.join(SetResult::file_name(mode, kind.as_str(), adapt.as_str())), &res)?;
    }
    Ok(())
}

fn read_results(dir: &Path) -> Result<Vec<SetResult>> {
    let mut names: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ssi_core::Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("wer_") && n.ends_with(".json"))
        })
        .collect();
    names.sort();
    names.iter().map(|p| read_json(p)).collect()
}

/// Long table: one row per test mode × feature type × adaptation. Wide
/// table: one row per test mode with raw/fMLLR columns, followed by each
/// adaptation strategy's WER and its difference from the matching baseline.
pub fn score_tables(results: &[SetResult]) -> (String, String) {
    let pct = |c: &WerCounts| 100.0 * c.wer();
    let mut long = String::from("mode,features,adaptation,wer,baseline_wer,delta,errors,ref_words\n");
    for r in results {
        let fin = r.final_counts();
        let delta = r.pass2.map(|_| pct(&fin) - pct(&r.pass1));
        let _ = writeln!(
            long,
            "{},{},{},{:.2},{:.2},{},{},{}",
            r.mode,
            r.features,
            r.adaptation,
            pct(&fin),
            pct(&r.pass1),
            delta.map(|d| format!("{d:+.2}")).unwrap_or_default(),
            fin.errors(),
            fin.ref_len
        );
    }
    let modes: BTreeSet<Mode> = results.iter().map(|r| r.mode).collect();
    let strategies: BTreeSet<&str> =
        results.iter().map(|r| r.adaptation.as_str()).filter(|a| *a != "none").collect();
    let mut cols: Vec<(String, &str, String)> = vec![];
    for kind in ["raw", "fmllr"] {
        cols.push((kind.into(), kind, "none".into()));
    }
    for a in &strategies {
        for kind in ["raw", "fmllr"] {
            cols.push((format!("{kind}+{a}"), kind, a.to_string()));
        }
    }
    let mut wide = String::from("test_set");
    for (name, _, a) in &cols {
        let _ = write!(wide, ",{name}");
        if a != "none" {
            let _ = write!(wide, ",{name}_delta");
        }
    }
    wide.push('\n');
    for mode in modes {
        wide.push_str(mode.as_str());
        for (_, kind, a) in &cols {
            let hit = results.iter().find(|r| r.mode == mode && r.features == *kind && r.adaptation == *a);
            let _ = write!(wide, ",{}", hit.map(|r| format!("{:.2}", pct(&r.final_counts()))).unwrap_or_default());
            if a != "none" {
                let d = hit.and_then(|r| r.pass2.map(|p| pct(&p) - pct(&r.pass1)));
                let _ = write!(wide, ",{}", d.map(|d| format!("{d:+.2}")).unwrap_or_default());
            }
        }
        wide.push('\n');
    }
    (long, wide)
}

pub fn score(cfg: &RunConfig) -> Result<()> {
    let out = cfg.require("out")?.to_path_buf();
    let src = cfg.paths.results.clone().unwrap_or_else(|| out.clone());
    let results = read_results(&src)?;
    if results.is_empty() {
        bail!(ssi_core::Error::invalid(format!("no wer_*.json results in {}", src.display())));
    }
    write_run_json(&out, cfg)?;
    let (long, wide) = score_tables(&results);
    for (name, text) in [("wer_long.csv", &long), ("wer_table.csv", &wide)] {
        let p = out.join(name);
        fs::write(&p, text).map_err(|e| ssi_core::Error::io(&p, e))?;
    }
    for line in wide.lines() {
        info!("{line}");
    }
    Ok(())
}

fn load_contours(cfg: &RunConfig, m: &Manifest) -> Result<HashMap<String, Vec<TongueContour>>> {
    let root = cfg.require("corpus")?;
    m.records
        .par_iter()
        .map(|r| {
            let file = root.join("contours").join(format!("{}.csv", r.id));
            let c = if file.exists() && !cfg.track_contours {
                read_contours_csv(&file)?
            } else {
                let seq = m.ultrasound(r)?;
                let mut out = Vec::with_capacity(seq.len());
                for i in 0..seq.len() {
                    // Frames are stored as raw 8-bit intensities.
                    let g = seq.grid(i);
                    let scale = if g.data.iter().any(|&v| v > 1.0) { 1.0 / 255.0 } else { 1.0 };
                    let g = ssi_core::corpus::Grid::new(g.height, g.width, g.data.iter().map(|v| v * scale).collect())?;
                    let c = ridge_track(&g, &r.id, i, RidgeParams::default())?;
                    if c.points.len() >= 2 {
                        out.push(c);
                    }
                }
                out
            };
            Ok((r.id.clone(), c))
        })
        .collect()
}

fn wer_map(cfg: &RunConfig, modes: &[Mode]) -> Result<BTreeMap<(String, Mode), f64>> {
    let mut map = BTreeMap::new();
    let Some(dir) = &cfg.paths.results else {
        return Ok(map);
    };
    for &mode in modes {
        let p = dir.join(SetResult::file_name(mode, cfg.features.as_str(), cfg.adapt.as_str()));
        if !p.exists() {
            log::warn!("{} missing; WER statistics for {mode} skipped", p.display());
            continue;
        }
        let r: SetResult = read_json(&p)?;
        for (spk, w) in r.speaker_wer {
            map.insert((spk, mode), w);
        }
    }
    Ok(map)
}

pub fn analyze(cfg: &RunConfig) -> Result<()> {
    let (m, _) = open_corpus(cfg)?;
    let out = out_dir(cfg)?;
    let contours = load_contours(cfg, &m)?;
    let params = SpaceParams { contamination: cfg.contamination, seed: cfg.seed, ..SpaceParams::default() };
    let space = articulatory_space(&m.records, &contours, params)?;
    write_hull_csv(&out.join("hulls.csv"), &space)?;
    let first = m.records.first().context("corpus has no records")?;
    let (h, w) = (first.ultrasound.header.height as usize, first.ultrasound.header.width as usize);
    write_speaker_svgs(&out.join("hulls"), &m.records, &contours, &space, w, h)?;
    let modes: Vec<Mode> = m.records.iter().map(|r| r.mode).collect::<BTreeSet<_>>().into_iter().collect();
    let area = space.area_map();
    let wer = wer_map(cfg, &modes)?;
    let report = mode_comparison_report(&ReportInputs { records: &m.records, hull_area: &area, wer: &wer }, cfg.alpha)?;
    report.write_csv(&out)?;
    report.write_figures(&out)?;
    for t in &report.tests {
        info!("{t:?}");
    }
    Ok(())
}

/// Copies every CSV and SVG under the input directories into the output
/// directory, prefixed by the input directory's name, and lists them in
/// `index.json`.
pub fn report(cfg: &RunConfig) -> Result<()> {
    let out = out_dir(cfg)?;
    if cfg.paths.inputs.is_empty() {
        bail!(crate::config::UsageError("report needs at least one input directory".into()));
    }
    let mut index = BTreeMap::new();
    for dir in &cfg.paths.inputs {
        let prefix = dir.file_name().and_then(|n| n.to_str()).unwrap_or("input").to_string();
        for file in walk(dir)? {
            let ext = file.extension().and_then(|e| e.to_str()).unwrap_or("");
            if ext != "csv" && ext != "svg" {
                continue;
            }
            let rel = file.strip_prefix(dir)?.to_string_lossy().replace(['/', '\\'], "_");
            let name = format!("{prefix}_{rel}");
            fs::copy(&file, out.join(&name)).map_err(|e| ssi_core::Error::io(&file, e))?;
            index.insert(name, file.display().to_string());
        }
    }
    if index.is_empty() {
        bail!(ssi_core::Error::invalid("no CSV or SVG artifacts found in the inputs"));
    }
    write_json(&out.join("index.json"), &index)?;
    info!("collected {} artifacts", index.len());
    Ok(())
}

fn walk(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = vec![];
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| ssi_core::Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            out.extend(walk(&p)?);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}
