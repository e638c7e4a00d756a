use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LexEntry {
    pub phones: Vec<u16>,
    pub syllables: u32,
}

/// Pronunciations over a phone inventory. Text form, one word per line:
/// `word<TAB>syllables<TAB>phone phone ...`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Lexicon {
    pub entries: BTreeMap<String, LexEntry>,
}

impl Lexicon {
    pub fn insert(&mut self, word: impl Into<String>, phones: Vec<u16>, syllables: u32) {
        self.entries.insert(word.into(), LexEntry { phones, syllables });
    }

    pub fn get(&self, word: &str) -> Option<&LexEntry> {
        self.entries.get(word)
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Concatenated phone sequence of a transcript.
    pub fn expand(&self, words: &[impl AsRef<str>]) -> Result<Vec<u16>> {
        let mut out = vec![];
        for w in words {
            let e = self
                .get(w.as_ref())
                .ok_or_else(|| Error::invalid(format!("word '{}' missing from lexicon", w.as_ref())))?;
            out.extend_from_slice(&e.phones);
        }
        Ok(out)
    }

    pub fn syllables(&self, words: &[impl AsRef<str>]) -> Result<u32> {
        words
            .iter()
            .map(|w| {
                self.get(w.as_ref())
                    .map(|e| e.syllables)
                    .ok_or_else(|| Error::invalid(format!("word '{}' missing from lexicon", w.as_ref())))
            })
            .sum()
    }

    pub fn validate(&self, phones: &[String]) -> Result<()> {
        for (w, e) in &self.entries {
            if e.phones.is_empty() {
                return Err(Error::invalid(format!("word '{w}' has no phones")));
            }
            if let Some(p) = e.phones.iter().find(|&&p| p as usize >= phones.len()) {
                return Err(Error::invalid(format!(
                    "word '{w}' uses phone index {p} outside inventory of {}",
                    phones.len()
                )));
            }
        }
        Ok(())
    }

    pub fn read(path: &Path, phones: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let ctx = || format!("{}:{}", path.display(), i + 1);
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(ctx(), "expected word<TAB>syllables<TAB>phones"));
            }
            let syllables: u32 = cols[1]
                .parse()
                .map_err(|_| Error::parse(ctx(), format!("bad syllable count '{}'", cols[1])))?;
            let seq = cols[2]
                .split_whitespace()
                .map(|p| {
                    phones
                        .iter()
                        .position(|q| q == p)
                        .map(|i| i as u16)
                        .ok_or_else(|| Error::parse(ctx(), format!("unknown phone '{p}'")))
                })
                .collect::<Result<Vec<_>>>()?;
            lex.insert(cols[0], seq, syllables);
        }
        lex.validate(phones)?;
        Ok(lex)
    }

    pub fn write(&self, path: &Path, phones: &[String]) -> Result<()> {
        let mut s = String::new();
        for (w, e) in &self.entries {
            let ph: Vec<&str> = e.phones.iter().map(|&p| phones[p as usize].as_str()).collect();
            let _ = writeln!(s, "{w}\t{}\t{}", e.syllables, ph.join(" "));
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip_and_expansion() {
        let phones: Vec<String> = ["a", "b", "k"].iter().map(|s| s.to_string()).collect();
        let mut lex = Lexicon::default();
        lex.insert("ab", vec![0, 1], 1);
        lex.insert("kak", vec![2, 0, 2], 1);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lexicon.txt");
        lex.write(&p, &phones).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap(), "ab\t1\ta b\nkak\t1\tk a k\n");
        let back = Lexicon::read(&p, &phones).unwrap();
        assert_eq!(back, lex);
        assert_eq!(back.expand(&["kak", "ab"]).unwrap(), vec![2, 0, 2, 0, 1]);
        assert_eq!(back.syllables(&["kak", "ab"]).unwrap(), 2);
        assert!(back.expand(&["zz"]).is_err());
    }

    #[test]
    fn unknown_phone_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lexicon.txt");
        fs::write(&p, "ab\t1\ta q\n").unwrap();
        let err = Lexicon::read(&p, &["a".to_string()]).unwrap_err().to_string();
        assert!(err.contains(":1") && err.contains("'q'"), "{err}");
    }
}
