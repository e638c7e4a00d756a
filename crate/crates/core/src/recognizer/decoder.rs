use serde::{Deserialize, Serialize};

use super::{BigramLm, FeatureMatrix, GmmHmmModel, Lexicon, SENTENCE_END, SENTENCE_START};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub lm_scale: f64,
    pub word_penalty: f64,
    /// Tokens scoring more than this below the frame's best are dropped.
    pub beam: Option<f64>,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self { lm_scale: 10.0, word_penalty: 0.0, beam: None }
    }
}

/// Decoding result. `boundaries[i]` is the inclusive frame span of word `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub words: Vec<String>,
    pub score: f64,
    pub boundaries: Vec<(usize, usize)>,
}

const NO_LINK: u32 = u32::MAX;

struct Link {
    word: u32,
    start: u32,
    prev: u32,
}

/// Exact token-passing Viterbi over the lexicon loop with bigram word
/// transitions. The score of a path is the sum of HMM emission and
/// transition log-probabilities (including the final exit), `lm_scale`
/// times the LM log-probability (sentence start and end included) and
/// `word_penalty` per word.
pub fn decode_viterbi(
    model: &GmmHmmModel,
    lm: &BigramLm,
    lexicon: &Lexicon,
    feats: &FeatureMatrix,
    params: &DecodeParams,
) -> Result<Hypothesis> {
    if feats.dim() != model.dim() {
        return Err(Error::Shape(format!("features of dim {} for model of dim {}", feats.dim(), model.dim())));
    }
    let t_len = feats.len();
    if t_len == 0 {
        return Err(Error::invalid("cannot decode an empty utterance"));
    }
    let words: Vec<&str> = lexicon.words().collect();
    if words.is_empty() {
        return Err(Error::invalid("empty lexicon"));
    }
    let nw = words.len();
    let chains: Vec<Vec<usize>> = words
        .iter()
        .map(|w| GmmHmmModel::state_sequence(&lexicon.get(w).unwrap().phones))
        .collect();
    for (w, c) in words.iter().zip(&chains) {
        if c.iter().any(|&s| s >= model.n_states()) {
            return Err(Error::invalid(format!("word '{w}' uses a phone the model lacks")));
        }
    }
    let lm_w: Vec<usize> = words
        .iter()
        .map(|w| lm.word_index(w).ok_or_else(|| Error::invalid(format!("word '{w}' not in LM vocabulary"))))
        .collect::<Result<_>>()?;
    let lm_h: Vec<usize> = words.iter().map(|w| lm.history_index(w).unwrap()).collect();
    let end = lm.word_index(SENTENCE_END).unwrap();
    let start_h = lm.history_index(SENTENCE_START).unwrap();
    let lmc = |h: usize, w: usize| params.lm_scale * lm.prob_idx(h, w).ln() + params.word_penalty;
    // trans[u][v]: cost of entering v after u.
    let trans: Vec<Vec<f64>> = (0..nw).map(|u| (0..nw).map(|v| lmc(lm_h[u], lm_w[v])).collect()).collect();
    let initial: Vec<f64> = (0..nw).map(|v| lmc(start_h, lm_w[v])).collect();
    let final_cost: Vec<f64> =
        (0..nw).map(|u| params.lm_scale * lm.prob_idx(lm_h[u], end).ln()).collect();

    let all_states: Vec<usize> = (0..model.n_states()).collect();
    let em = model.emission_table(feats, &all_states);
    let ns = model.n_states();
    let log_self: Vec<f64> = model.states.iter().map(|s| s.log_self()).collect();
    let log_next: Vec<f64> = model.states.iter().map(|s| s.log_next()).collect();

    let neg = f64::NEG_INFINITY;
    let mut links: Vec<Link> = Vec::new();
    let mut score: Vec<Vec<f64>> = chains.iter().map(|c| vec![neg; c.len()]).collect();
    let mut link: Vec<Vec<u32>> = chains.iter().map(|c| vec![NO_LINK; c.len()]).collect();
    let mut next_score = score.clone();
    let mut next_link = link.clone();

    for v in 0..nw {
        links.push(Link { word: v as u32, start: 0, prev: NO_LINK });
        score[v][0] = initial[v] + em[chains[v][0]];
        link[v][0] = (links.len() - 1) as u32;
    }
    for t in 1..t_len {
        let row = &em[t * ns..(t + 1) * ns];
        // Word-end tokens of frame t-1.
        let exits: Vec<f64> = (0..nw)
            .map(|u| {
                let last = chains[u].len() - 1;
                score[u][last] + log_next[chains[u][last]]
            })
            .collect();
        for v in 0..nw {
            let c = &chains[v];
            let mut best_entry = neg;
            let mut best_from = usize::MAX;
            for u in 0..nw {
                let s = exits[u] + trans[u][v];
                if s > best_entry {
                    best_entry = s;
                    best_from = u;
                }
            }
            for j in 0..c.len() {
                let mut best = score[v][j] + log_self[c[j]];
                let mut from = link[v][j];
                if j > 0 {
                    let adv = score[v][j - 1] + log_next[c[j - 1]];
                    if adv > best {
                        best = adv;
                        from = link[v][j - 1];
                    }
                } else if best_entry > best {
                    best = best_entry;
                    let u = best_from;
                    let last = chains[u].len() - 1;
                    links.push(Link { word: v as u32, start: t as u32, prev: link[u][last] });
                    from = (links.len() - 1) as u32;
                }
                next_score[v][j] = if best == neg { neg } else { best + row[c[j]] };
                next_link[v][j] = from;
            }
        }
        if let Some(beam) = params.beam {
            let top = next_score.iter().flatten().copied().fold(neg, f64::max);
            for s in next_score.iter_mut().flatten() {
                if *s < top - beam {
                    *s = neg;
                }
            }
        }
        std::mem::swap(&mut score, &mut next_score);
        std::mem::swap(&mut link, &mut next_link);
        if score.iter().flatten().all(|s| *s == neg) {
            return Err(Error::Numerical(format!("no surviving token at frame {t}; widen the beam")));
        }
    }
    let mut best = neg;
    let mut best_link = NO_LINK;
    for u in 0..nw {
        let last = chains[u].len() - 1;
        let s = score[u][last] + log_next[chains[u][last]] + final_cost[u];
        if s > best {
            best = s;
            best_link = link[u][last];
        }
    }
    if best_link == NO_LINK || !best.is_finite() {
        return Err(Error::Numerical("no complete path through the decoding graph".into()));
    }
    let mut out_words = Vec::new();
    let mut boundaries = Vec::new();
    let mut end_frame = t_len - 1;
    let mut l = best_link;
    while l != NO_LINK {
        let lk = &links[l as usize];
        out_words.push(words[lk.word as usize].to_string());
        boundaries.push((lk.start as usize, end_frame));
        end_frame = (lk.start as usize).saturating_sub(1);
        l = lk.prev;
    }
    out_words.reverse();
    boundaries.reverse();
    Ok(Hypothesis { words: out_words, score: best, boundaries })
}
