use std::collections::HashSet;

use rand::seq::SliceRandom;

use super::{Manifest, Split};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug)]
pub struct SplitOptions {
    /// Fraction of non-test records held out for validation.
    pub validation_ratio: f64,
    pub seed: u64,
}

impl Default for SplitOptions {
    fn default() -> Self {
        Self {
            validation_ratio: 0.1,
            seed: 0,
        }
    }
}

/// Tags every record whose prompt is a test prompt as test; the remainder is
/// divided into train and validation. No train prompt can equal a test prompt.
pub fn split_prompt_disjoint(
    mut manifest: Manifest,
    test_prompts: &HashSet<String>,
    opts: SplitOptions,
) -> Result<Manifest> {
    if test_prompts.is_empty() {
        return Err(Error::invalid("test prompt set is empty"));
    }
    if !(0.0..1.0).contains(&opts.validation_ratio) {
        return Err(Error::invalid(format!(
            "validation ratio {} outside [0, 1)",
            opts.validation_ratio
        )));
    }
    let normalized: HashSet<String> = test_prompts
        .iter()
        .map(|p| p.split_whitespace().collect::<Vec<_>>().join(" "))
        .collect();
    let mut rest = Vec::new();
    for (i, r) in manifest.records.iter_mut().enumerate() {
        if normalized.contains(&r.prompt_key()) {
            r.split = Some(Split::Test);
        } else {
            r.split = Some(Split::Train);
            rest.push(i);
        }
    }
    let mut rng = rng::seeded(opts.seed, &[0x0005_0117]);
    rest.shuffle(&mut rng);
    let n_val = (opts.validation_ratio * rest.len() as f64).round() as usize;
    if n_val >= rest.len() {
        return Err(Error::invalid("split leaves no training records"));
    }
    for &i in &rest[..n_val] {
        manifest.records[i].split = Some(Split::Validation);
    }
    Ok(manifest)
}
