use std::collections::HashMap;

use super::{FeatureMatrix, GmmHmmModel, Lexicon};
use crate::error::{Error, Result};

/// Frame-to-state assignment of one utterance.
#[derive(Clone, Debug, PartialEq)]
pub struct Alignment {
    /// Global state id per frame.
    pub states: Vec<usize>,
    /// Path score: emissions, transitions and the final exit.
    pub log_likelihood: f64,
}

impl Alignment {
    pub fn phone_labels(&self) -> Vec<u16> {
        self.states.iter().map(|&s| GmmHmmModel::phone_of_state(s)).collect()
    }

    /// Frames where the chain position advances (first frame of each state
    /// occupancy after the first).
    pub fn boundaries(&self) -> Vec<usize> {
        (1..self.states.len()).filter(|&t| self.states[t] != self.states[t - 1]).collect()
    }
}

/// Viterbi path through a fixed left-to-right chain of states, entering at
/// the first state and leaving from the last.
pub fn forced_align_states(model: &GmmHmmModel, feats: &FeatureMatrix, chain: &[usize]) -> Result<Alignment> {
    let (t_len, n) = (feats.len(), chain.len());
    if n == 0 {
        return Err(Error::invalid("empty state sequence"));
    }
    if t_len < n {
        return Err(Error::invalid(format!("{t_len} frames cannot cover {n} states")));
    }
    if feats.dim() != model.dim() {
        return Err(Error::Shape(format!("features of dim {} for model of dim {}", feats.dim(), model.dim())));
    }
    let mut distinct: Vec<usize> = vec![];
    let mut slot: HashMap<usize, usize> = HashMap::new();
    let col: Vec<usize> = chain
        .iter()
        .map(|&s| {
            *slot.entry(s).or_insert_with(|| {
                distinct.push(s);
                distinct.len() - 1
            })
        })
        .collect();
    let k = distinct.len();
    let em = model.emission_table(feats, &distinct);
    let log_self: Vec<f64> = chain.iter().map(|&s| model.states[s].log_self()).collect();
    let log_next: Vec<f64> = chain.iter().map(|&s| model.states[s].log_next()).collect();

    let neg = f64::NEG_INFINITY;
    let mut prev = vec![neg; n];
    let mut cur = vec![neg; n];
    // advanced[t * n + j]: the path into (t, j) came from j - 1.
    let mut advanced = vec![false; t_len * n];
    prev[0] = em[col[0]];
    for t in 1..t_len {
        // Position j is reachable at frame t only if j <= t and the rest of
        // the chain still fits in the remaining frames.
        let lo = (n + t).saturating_sub(t_len);
        let hi = t.min(n - 1);
        cur.iter_mut().for_each(|v| *v = neg);
        for j in lo..=hi {
            let stay = prev[j] + log_self[j];
            let adv = if j > 0 { prev[j - 1] + log_next[j - 1] } else { neg };
            let (best, a) = if adv > stay { (adv, true) } else { (stay, false) };
            cur[j] = best + em[t * k + col[j]];
            advanced[t * n + j] = a;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    let total = prev[n - 1] + log_next[n - 1];
    if !total.is_finite() {
        return Err(Error::Numerical("forced alignment produced a non-finite score".into()));
    }
    let mut states = vec![0; t_len];
    let mut j = n - 1;
    for t in (0..t_len).rev() {
        states[t] = chain[j];
        if t > 0 && advanced[t * n + j] {
            j -= 1;
        }
    }
    Ok(Alignment { states, log_likelihood: total })
}

/// Forced alignment of a word transcript.
pub fn align(
    model: &GmmHmmModel,
    lexicon: &Lexicon,
    feats: &FeatureMatrix,
    transcript: &[impl AsRef<str>],
) -> Result<Alignment> {
    let phones = lexicon.expand(transcript)?;
    forced_align_states(model, feats, &GmmHmmModel::state_sequence(&phones))
}
