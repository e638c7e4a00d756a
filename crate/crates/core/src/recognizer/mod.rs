//! Monophone GMM-HMM recognition over frame features: flat start, Viterbi
//! EM, LDA, fMLLR speaker adaptation, bigram-LM decoding, WER scoring and
//! unsupervised adaptation.

mod adapt;
mod align;
mod decoder;
mod features;
mod fmllr;
mod lda;
mod lexicon;
mod lm;
mod model;
mod system;
mod train;
mod wer;

pub use adapt::{adapt_unsupervised, map_adapt_means, AdaptOutcome, AdaptStrategy, PassResult};
pub use align::{align, forced_align_states, Alignment};
pub use decoder::{decode_viterbi, DecodeParams, Hypothesis};
pub use features::FeatureMatrix;
pub use fmllr::{estimate_fmllr, FmllrOptions, FmllrStats, FmllrTransform};
pub use lda::{estimate_lda, LdaTransform};
pub use lexicon::{LexEntry, Lexicon};
pub use lm::{BigramLm, SENTENCE_END, SENTENCE_START};
pub use model::{DiagGmm, GmmHmmModel, HmmState, STATES_PER_PHONE};
pub use system::{
    decode_set, score_set, AcousticSystem, FeatureKind, SetDecode, TestUtterance, TrainConfig, TrainReport,
    TrainUtterance,
};
pub use train::{flat_start, init_from_alignments, realign, reestimate, train_em, EmReport, EmSchedule};
pub use wer::{wer, WerCounts};
