use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use ssi_core::recognizer::FeatureKind;

use crate::config::{AdaptChoice, Preset};

#[derive(Debug, Parser)]
#[command(name = "ssi", version, about = "Silent speech recognition and articulatory analysis pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: Global,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Synth,
    /// Train the bottleneck feature network on ultrasound frames.
    TrainFeatnet,
    /// Write bottleneck features for every utterance.
    ExtractFeatures,
    /// Train the GMM-HMM acoustic model and bigram language model.
    TrainAm,
    /// Decode every test set.
    Decode,
    /// Two-pass unsupervised adaptation on every test set.
    Adapt,
    /// Collect decode and adapt results into a WER table.
    Score,
    /// Hull areas, durations and paired statistics.
    Analyze,
    /// Assemble CSV and SVG artifacts from several output directories.
    Report {
        /// Directories to collect from.
        inputs: Vec<PathBuf>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::TrainFeatnet => "train-featnet",
            Command::ExtractFeatures => "extract-features",
            Command::TrainAm => "train-am",
            Command::Decode => "decode",
            Command::Adapt => "adapt",
            Command::Score => "score",
            Command::Analyze => "analyze",
            Command::Report { .. } => "report",
        }
    }
}

#[derive(Debug, Args)]
pub struct Global {
    /// Corpus directory containing manifest.json.
    #[arg(long, global = true)]
    pub corpus: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Model directory.
    #[arg(long, global = true)]
    pub model: Option<PathBuf>,
    /// Directory of per-utterance feature matrices (default: <corpus>/feats).
    #[arg(long, global = true)]
    pub feats: Option<PathBuf>,
    /// Directory holding decode/adapt results.
    #[arg(long, global = true)]
    pub results: Option<PathBuf>,
    /// JSON run configuration; explicit flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (default: available cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true)]
    pub features: Option<FeatureKind>,
    #[arg(long, global = true, value_enum)]
    pub adapt: Option<AdaptChoice>,
    #[arg(long, global = true)]
    pub lm_scale: Option<f64>,
    #[arg(long, global = true)]
    pub word_penalty: Option<f64>,
    #[arg(long, global = true)]
    pub contamination: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub preset: Option<Preset>,
}
