use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SENTENCE_START: &str = "<s>";
pub const SENTENCE_END: &str = "</s>";

/// Witten-Bell smoothed bigram with backoff to an interpolated unigram.
///
/// Predicted symbols are the vocabulary words plus `</s>`; histories are
/// `<s>` plus the vocabulary words. For a history `h` seen `c(h)` times with
/// `T(h)` distinct successors,
/// `P(w|h) = (c(h,w) + T(h)·P1(w)) / (c(h) + T(h))`, and unseen histories
/// back off to `P1` entirely. `P1` is itself Witten-Bell interpolated with the
/// uniform distribution over predicted symbols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BigramLm {
    vocab: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    unigram: Vec<f64>,
    /// Per history: (c(h), T(h)).
    history: Vec<(u64, u64)>,
    bigrams: BTreeMap<(usize, usize), u64>,
}

impl BigramLm {
    pub fn train(sentences: &[Vec<String>]) -> Result<Self> {
        Self::train_with_vocab(sentences, std::iter::empty::<&str>())
    }

    /// Trains on `sentences`; `extra` words join the vocabulary with zero
    /// counts so they still receive smoothed mass.
    pub fn train_with_vocab<'a>(
        sentences: &[Vec<String>],
        extra: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let mut words: BTreeSet<String> = extra.into_iter().map(str::to_string).collect();
        for s in sentences {
            for w in s {
                if w == SENTENCE_START || w == SENTENCE_END {
                    return Err(Error::invalid(format!("reserved token '{w}' inside a sentence")));
                }
                words.insert(w.clone());
            }
        }
        if words.is_empty() {
            return Err(Error::invalid("language model vocabulary is empty"));
        }
        let vocab: Vec<String> = words.into_iter().collect();
        let index = index_of(&vocab);
        let v = vocab.len();
        let end = v;

        let mut uni = vec![0u64; v + 1];
        let mut bigrams: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for s in sentences {
            let mut h = 0usize;
            for w in s {
                let wi = index[w];
                uni[wi] += 1;
                *bigrams.entry((h, wi)).or_default() += 1;
                h = wi + 1;
            }
            uni[end] += 1;
            *bigrams.entry((h, end)).or_default() += 1;
        }
        let n: u64 = uni.iter().sum();
        let types = uni.iter().filter(|&&c| c > 0).count() as f64;
        let uniform = 1.0 / (v + 1) as f64;
        let unigram = if n == 0 {
            vec![uniform; v + 1]
        } else {
            uni.iter()
                .map(|&c| (c as f64 + types * uniform) / (n as f64 + types))
                .collect()
        };
        let mut history = vec![(0u64, 0u64); v + 1];
        for (&(h, _), &c) in &bigrams {
            history[h].0 += c;
            history[h].1 += 1;
        }
        Ok(Self { vocab, index, unigram, history, bigrams })
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    /// Index of a word as a predicted symbol; `</s>` maps to `vocab().len()`.
    pub fn word_index(&self, w: &str) -> Option<usize> {
        if w == SENTENCE_END {
            Some(self.vocab.len())
        } else {
            self.index.get(w).copied()
        }
    }

    /// Index of a history; `<s>` is 0 and word `i` is `i + 1`.
    pub fn history_index(&self, h: &str) -> Option<usize> {
        if h == SENTENCE_START {
            Some(0)
        } else {
            self.index.get(h).map(|i| i + 1)
        }
    }

    pub fn unigram_prob(&self, w: usize) -> f64 {
        self.unigram[w]
    }

    /// Backoff weight `T(h) / (c(h) + T(h))`; 1 for unseen histories.
    pub fn backoff_weight(&self, h: usize) -> f64 {
        let (c, t) = self.history[h];
        if c == 0 {
            1.0
        } else {
            t as f64 / (c + t) as f64
        }
    }

    pub fn prob_idx(&self, h: usize, w: usize) -> f64 {
        let (c, t) = self.history[h];
        if c == 0 {
            return self.unigram[w];
        }
        let cw = self.bigrams.get(&(h, w)).copied().unwrap_or(0) as f64;
        (cw + t as f64 * self.unigram[w]) / (c + t) as f64
    }

    pub fn prob(&self, h: &str, w: &str) -> Result<f64> {
        let hi = self
            .history_index(h)
            .ok_or_else(|| Error::invalid(format!("history '{h}' not in LM vocabulary")))?;
        let wi = self
            .word_index(w)
            .ok_or_else(|| Error::invalid(format!("word '{w}' not in LM vocabulary")))?;
        Ok(self.prob_idx(hi, wi))
    }

    /// Natural-log probability of a full sentence including `</s>`.
    pub fn sentence_log_prob(&self, words: &[impl AsRef<str>]) -> Result<f64> {
        let mut h = SENTENCE_START.to_string();
        let mut lp = 0.0;
        for w in words {
            lp += self.prob(&h, w.as_ref())?.ln();
            h = w.as_ref().to_string();
        }
        Ok(lp + self.prob(&h, SENTENCE_END)?.ln())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let s = serde_json::to_string(&SerLm::from(self)).map_err(|e| Error::invalid(e.to_string()))?;
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ser: SerLm =
            serde_json::from_str(&s).map_err(|e| Error::parse(path.display().to_string(), e.to_string()))?;
        ser.try_into()
            .map_err(|m: String| Error::parse(path.display().to_string(), m))
    }
}

fn index_of(vocab: &[String]) -> HashMap<String, usize> {
    vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect()
}

#[derive(Serialize, Deserialize)]
struct SerLm {
    vocab: Vec<String>,
    unigram: Vec<f64>,
    history: Vec<(u64, u64)>,
    bigrams: Vec<(usize, usize, u64)>,
}

impl From<&BigramLm> for SerLm {
    fn from(lm: &BigramLm) -> Self {
        SerLm {
            vocab: lm.vocab.clone(),
            unigram: lm.unigram.clone(),
            history: lm.history.clone(),
            bigrams: lm.bigrams.iter().map(|(&(h, w), &c)| (h, w, c)).collect(),
        }
    }
}

impl TryFrom<SerLm> for BigramLm {
    type Error = String;

    fn try_from(s: SerLm) -> Result<Self, String> {
        let v = s.vocab.len();
        if s.unigram.len() != v + 1 || s.history.len() != v + 1 {
            return Err("table sizes do not match vocabulary".into());
        }
        if s.bigrams.iter().any(|&(h, w, _)| h > v || w > v) {
            return Err("bigram index outside vocabulary".into());
        }
        Ok(BigramLm {
            index: index_of(&s.vocab),
            vocab: s.vocab,
            unigram: s.unigram,
            history: s.history,
            bigrams: s.bigrams.into_iter().map(|(h, w, c)| ((h, w), c)).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sents(list: &[&str]) -> Vec<Vec<String>> {
        list.iter()
            .map(|s| s.split_whitespace().map(str::to_string).collect())
            .collect()
    }

    #[test]
    fn hand_computed_two_sentence_corpus() {
        let lm = BigramLm::train(&sents(&["a b", "a b"])).unwrap();
        // Predicted tokens a b </s> a b </s>: N = 6, three types, |V| = 3.
        // P1(b) = (2 + 3/3) / (6 + 3) = 1/3; history a: c = 2, T = 1.
        assert!((lm.prob("a", "b").unwrap() - 7.0 / 9.0).abs() < 1e-15);
        assert!((lm.prob("a", "a").unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((lm.backoff_weight(lm.history_index("a").unwrap()) - 1.0 / 3.0).abs() < 1e-15);
        assert!(lm.backoff_weight(0) > 0.0);
    }

    #[test]
    fn single_word_corpus() {
        let lm = BigramLm::train(&sents(&["w"])).unwrap();
        let h = lm.history_index(SENTENCE_START).unwrap();
        let total: f64 = (0..=lm.vocab().len()).map(|w| lm.prob_idx(h, w)).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(lm.prob(SENTENCE_START, "w").unwrap() > 0.5);
    }

    #[test]
    fn empty_vocabulary_is_rejected() {
        assert!(BigramLm::train(&[]).is_err());
        assert!(BigramLm::train(&[vec![]]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let lm = BigramLm::train_with_vocab(&sents(&["a b c", "b c"]), ["z"]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lm.json");
        lm.save(&p).unwrap();
        let back = BigramLm::load(&p).unwrap();
        assert_eq!(back, lm);
        assert_eq!(back.prob("c", "z").unwrap(), lm.prob("c", "z").unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn every_history_normalizes(
            corpus in prop::collection::vec(prop::collection::vec(0u8..6, 0..6), 1..8),
            extra in 0usize..3,
        ) {
            let sentences: Vec<Vec<String>> = corpus
                .iter()
                .map(|s| s.iter().map(|w| format!("w{w}")).collect())
                .collect();
            let extra_words: Vec<String> = (0..extra).map(|i| format!("x{i}")).collect();
            let built = BigramLm::train_with_vocab(&sentences, extra_words.iter().map(String::as_str));
            let Ok(lm) = built else { return Ok(()); };
            let v = lm.vocab().len();
            for h in 0..=v {
                let total: f64 = (0..=v).map(|w| lm.prob_idx(h, w)).sum();
                prop_assert!((total - 1.0).abs() < 1e-9, "history {h}: {total}");
            }
        }
    }
}
