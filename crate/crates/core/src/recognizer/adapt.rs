use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::system::{apply_transforms, decode_all, fmllr_from_hyps};
use super::{
    align, decode_set, score_set, AcousticSystem, Alignment, BigramLm, DecodeParams, FeatureKind, FeatureMatrix,
    GmmHmmModel, Hypothesis, Lexicon, TestUtterance, WerCounts,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum AdaptStrategy {
    /// Re-estimate per-speaker fMLLR from first-pass hypotheses.
    Fmllr,
    /// MAP update of all Gaussian means, pooled over the test set.
    Map { tau: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassResult {
    pub hyps: Vec<Hypothesis>,
    pub counts: WerCounts,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptOutcome {
    pub pass1: PassResult,
    pub pass2: PassResult,
}

/// MAP mean update `μ' = (τ μ + Σ γ x) / (τ + Σ γ)` with component
/// posteriors of the aligned states under the prior model.
pub fn map_adapt_means(
    prior: &GmmHmmModel,
    feats: &[FeatureMatrix],
    states: &[Vec<usize>],
    tau: f64,
) -> Result<GmmHmmModel> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("MAP relevance factor must be non-negative, got {tau}")));
    }
    let d = prior.dim();
    let mut occ: Vec<Vec<f64>> = prior.states.iter().map(|s| vec![0.0; s.gmm.n_components()]).collect();
    let mut sum: Vec<Vec<Vec<f64>>> =
        prior.states.iter().map(|s| vec![vec![0.0; d]; s.gmm.n_components()]).collect();
    let mut post = vec![0.0; 64];
    for (f, st) in feats.iter().zip(states) {
        for (x, &s) in f.rows().zip(st) {
            let gmm = &prior.states[s].gmm;
            post.resize(post.len().max(gmm.n_components()), 0.0);
            gmm.posteriors(x, &mut post);
            for m in 0..gmm.n_components() {
                occ[s][m] += post[m];
                for i in 0..d {
                    sum[s][m][i] += post[m] * x[i];
                }
            }
        }
    }
    let mut out = prior.clone();
    for (s, st) in out.states.iter_mut().enumerate() {
        let means: Vec<Vec<f64>> = st
            .gmm
            .means()
            .iter()
            .enumerate()
            .map(|(m, mu)| {
                let n = occ[s][m];
                if tau + n <= 0.0 {
                    return mu.clone();
                }
                (0..d).map(|i| (tau * mu[i] + sum[s][m][i]) / (tau + n)).collect()
            })
            .collect();
        st.gmm.set_means(means)?;
    }
    Ok(out)
}

/// Two-pass unsupervised adaptation. Pass 1 is the ordinary decode with
/// `kind`; its hypotheses become the supervision for `iterations` rounds of
/// the chosen strategy, each followed by a fresh decode. With zero
/// iterations pass 2 repeats pass 1.
#[allow(clippy::too_many_arguments)]
pub fn adapt_unsupervised(
    system: &AcousticSystem,
    lm: &BigramLm,
    lexicon: &Lexicon,
    utts: &[TestUtterance],
    kind: FeatureKind,
    strategy: AdaptStrategy,
    iterations: usize,
    params: &DecodeParams,
) -> Result<AdaptOutcome> {
    let first = decode_set(system, lm, lexicon, utts, kind, params)?;
    let pass1 = PassResult { hyps: first.hyps.clone(), counts: first.counts };
    let prior = system.model(kind);
    let base: Vec<FeatureMatrix> = utts.par_iter().map(|u| system.project(&u.feats)).collect::<Result<_>>()?;
    let mut feats = first.feats;
    let mut hyps = first.hyps;
    for _ in 0..iterations {
        match strategy {
            AdaptStrategy::Fmllr => {
                let transforms = fmllr_from_hyps(prior, lexicon, &base, &feats, &hyps, utts, &system.fmllr)?;
                feats = apply_transforms(&base, utts, &transforms)?;
                hyps = decode_all(prior, lm, lexicon, &feats, params)?;
            }
            AdaptStrategy::Map { tau } => {
                let aligns: Vec<Alignment> = feats
                    .par_iter()
                    .zip(&hyps)
                    .map(|(f, h)| align(prior, lexicon, f, &h.words))
                    .collect::<Result<_>>()?;
                let states: Vec<Vec<usize>> = aligns.into_iter().map(|a| a.states).collect();
                let adapted = map_adapt_means(prior, &feats, &states, tau)?;
                hyps = decode_all(&adapted, lm, lexicon, &feats, params)?;
            }
        }
    }
    let counts = score_set(utts, &hyps)?;
    Ok(AdaptOutcome { pass1, pass2: PassResult { hyps, counts } })
}
