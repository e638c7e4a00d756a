use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use ssi_core::corpus::Mode;
use ssi_core::featnet::FeatNetConfig;
use ssi_core::recognizer::{DecodeParams, FeatureKind, TrainConfig};
use ssi_core::synth::SynthConfig;

use crate::args::{Cli, Command};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Desk,
    Full,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum AdaptChoice {
    #[default]
    None,
    Fmllr,
    Map,
}

impl AdaptChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            AdaptChoice::None => "none",
            AdaptChoice::Fmllr => "fmllr",
            AdaptChoice::Map => "map",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub feats: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub inputs: Vec<PathBuf>,
}

/// Everything a subcommand needs. Loaded from `--config`, then overridden
/// by explicit flags.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub preset: Preset,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub paths: Paths,
    pub features: FeatureKind,
    pub adapt: AdaptChoice,
    pub adapt_iterations: usize,
    pub map_tau: f64,
    pub decode: DecodeParams,
    pub contamination: f64,
    pub alpha: f64,
    /// Speaking modes the feature network and acoustic model are trained on.
    pub train_modes: Vec<Mode>,
    /// Every `featnet_stride`-th frame of an utterance becomes a training sample.
    pub featnet_stride: usize,
    /// Track contours from the ultrasound frames even when contour files exist.
    pub track_contours: bool,
    pub synth: Option<SynthConfig>,
    pub featnet: Option<FeatNetConfig>,
    pub am: Option<TrainConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            preset: Preset::Desk,
            seed: 0,
            jobs: None,
            paths: Paths::default(),
            features: FeatureKind::Raw,
            adapt: AdaptChoice::None,
            adapt_iterations: 1,
            map_tau: 10.0,
            decode: DecodeParams::default(),
            contamination: 0.02,
            alpha: 0.05,
            train_modes: vec![Mode::Modal],
            featnet_stride: 4,
            track_contours: false,
            synth: None,
            featnet: None,
            am: None,
        }
    }
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> anyhow::Result<Self> {
        let mut cfg: RunConfig = match &cli.global.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| ssi_core::Error::parse(path.display().to_string(), e.to_string()))?
            }
            None => RunConfig::default(),
        };
        let g = &cli.global;
        cfg.command = cli.command.name().to_string();
        if let Some(v) = g.preset {
            cfg.preset = v;
        }
        if let Some(v) = g.seed {
            cfg.seed = v;
        }
        if g.jobs.is_some() {
            cfg.jobs = g.jobs;
        }
        if let Some(v) = g.features {
            cfg.features = v;
        }
        if let Some(v) = g.adapt {
            cfg.adapt = v;
        }
        if let Some(v) = g.lm_scale {
            cfg.decode.lm_scale = v;
        }
        if let Some(v) = g.word_penalty {
            cfg.decode.word_penalty = v;
        }
        if let Some(v) = g.contamination {
            cfg.contamination = v;
        }
        if let Some(v) = g.alpha {
            cfg.alpha = v;
        }
        let p = &mut cfg.paths;
        for (slot, flag) in [
            (&mut p.corpus, &g.corpus),
            (&mut p.out, &g.out),
            (&mut p.model, &g.model),
            (&mut p.feats, &g.feats),
            (&mut p.results, &g.results),
        ] {
            if flag.is_some() {
                slot.clone_from(flag);
            }
        }
        if let Command::Report { inputs } = &cli.command {
            if !inputs.is_empty() {
                p.inputs.clone_from(inputs);
            }
        }
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), UsageError> {
        if !(0.0..0.5).contains(&self.contamination) {
            return Err(UsageError(format!("--contamination must lie in [0, 0.5), got {}", self.contamination)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(UsageError(format!("--alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.decode.lm_scale < 0.0 || !self.decode.lm_scale.is_finite() {
            return Err(UsageError(format!("--lm-scale must be non-negative, got {}", self.decode.lm_scale)));
        }
        if self.jobs == Some(0) {
            return Err(UsageError("--jobs must be at least 1".into()));
        }
        if self.featnet_stride == 0 {
            return Err(UsageError("featnet_stride must be at least 1".into()));
        }
        if self.train_modes.is_empty() {
            return Err(UsageError("train_modes is empty".into()));
        }
        Ok(())
    }

    pub fn synth_config(&self) -> SynthConfig {
        let mut c = self.synth.clone().unwrap_or_else(|| match self.preset {
            Preset::Desk => SynthConfig::desk(),
            Preset::Full => SynthConfig::full(),
        });
        c.seed = self.seed;
        c
    }

    pub fn featnet_config(&self) -> FeatNetConfig {
        let mut c = self.featnet.clone().unwrap_or_else(|| match self.preset {
            Preset::Desk => FeatNetConfig::desk(),
            Preset::Full => FeatNetConfig::full(),
        });
        c.seed = self.seed;
        c
    }

    pub fn am_config(&self) -> TrainConfig {
        self.am.clone().unwrap_or_default()
    }

    pub fn require(&self, which: &str) -> Result<&Path, UsageError> {
        let p = match which {
            "corpus" => &self.paths.corpus,
            "out" => &self.paths.out,
            "model" => &self.paths.model,
            "results" => &self.paths.results,
            _ => &None,
        };
        p.as_deref().ok_or_else(|| UsageError(format!("{} requires --{which}", self.command)))
    }

    pub fn feats_dir(&self) -> Result<PathBuf, UsageError> {
        match &self.paths.feats {
            Some(p) => Ok(p.clone()),
            None => Ok(self.require("corpus")?.join("feats")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    jobs: usize,
    argv: Vec<String>,
    config: &'a RunConfig,
}

pub fn write_run_json(dir: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    fs::create_dir_all(dir).map_err(|e| ssi_core::Error::io(dir, e))?;
    let rec = RunRecord {
        command: &cfg.command,
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        jobs: rayon::current_num_threads(),
        argv: std::env::args().collect(),
        config: cfg,
    };
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&rec)?).map_err(|e| ssi_core::Error::io(&path, e))?;
    Ok(())
}
