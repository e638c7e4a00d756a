use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Edit counts of one or more scored utterances.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WerCounts {
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
    pub ref_len: usize,
}

impl WerCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }

    pub fn wer(&self) -> f64 {
        if self.ref_len == 0 {
            return 0.0;
        }
        self.errors() as f64 / self.ref_len as f64
    }

    pub fn add(&mut self, other: &WerCounts) {
        self.substitutions += other.substitutions;
        self.deletions += other.deletions;
        self.insertions += other.insertions;
        self.ref_len += other.ref_len;
    }
}

impl std::iter::Sum for WerCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        let mut acc = WerCounts::default();
        for c in iter {
            acc.add(&c);
        }
        acc
    }
}

/// Unit-cost Levenshtein alignment. On ties the backtrace prefers a
/// diagonal step (match or substitution), then deletion, then insertion.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<WerCounts> {
    if reference.is_empty() {
        return Err(Error::invalid("empty reference"));
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        d[i * w] = i;
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let del = d[(i - 1) * w + j] + 1;
            let ins = d[i * w + j - 1] + 1;
            d[i * w + j] = sub.min(del).min(ins);
        }
    }
    let mut c = WerCounts { ref_len: n, ..Default::default() };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                if !same {
                    c.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[(i - 1) * w + j] + 1 == here {
            c.deletions += 1;
            i -= 1;
        } else {
            c.insertions += 1;
            j -= 1;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simple_cases() {
        let c = wer(&["a", "b", "c"], &["a", "c"]).unwrap();
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 1, 0));
        assert!((c.wer() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer(&["a", "b"], &["a", "b"]).unwrap().errors(), 0);
        assert!(wer::<&str>(&[], &["a"]).is_err());
    }

    #[test]
    fn substitution_preferred_over_insert_delete() {
        let c = wer(&["a"], &["b"]).unwrap();
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 0, 0));
        let c = wer(&["a", "b"], &["c", "d", "e"]).unwrap();
        assert_eq!((c.substitutions, c.deletions, c.insertions), (2, 0, 1));
    }
}
