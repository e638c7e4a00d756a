//! Articulatory speech processing toolkit.
//!
//! The crate covers two workflows that share one corpus model:
//!
//! - **Recognition**: ultrasound frames are windowed and fed to a convolutional
//!   phone classifier ([`featnet`]) whose 128-unit bottleneck layer becomes the
//!   frame feature. A monophone GMM-HMM ([`recognizer`]) is trained on those
//!   features from a flat start, projected with LDA, adapted per speaker with
//!   fMLLR and decoded with a bigram language model. Unsupervised adaptation
//!   reuses first-pass hypotheses as supervision.
//! - **Articulatory analysis**: tongue contours are pooled per speaker and
//!   speaking mode, pruned with an isolation forest and measured by convex-hull
//!   area ([`articspace`]); syllable rate, hull area and WER differences are
//!   compared with paired t-tests, Holm-Bonferroni correction and Pearson
//!   correlation ([`stats`]).
//!
//! [`synth`] generates deterministic corpora with planted speaking-mode effects
//! (tempo, articulatory contraction, feature shift) so both workflows can be
//! checked against known ground truth.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod articspace;
pub mod corpus;
pub mod error;
pub mod featnet;
pub mod recognizer;
pub mod rng;
pub mod stats;
pub mod svg;
pub mod synth;

pub use error::{Error, Result};
