use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::net::activation_pattern;
use super::{loss_and_gradient, FeatNetConfig, FeatNetParams};
use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub checked: usize,
    /// Coordinates left out because the probe crossed a ReLU or max-pool
    /// switch, where central differences do not estimate the derivative.
    pub skipped: usize,
    pub max_relative_error: f64,
    /// Trainable index of the worst coordinate.
    pub worst_index: usize,
}

/// Relative error `|a - n| / max(|a|, |n|)`; pairs where both are below
/// `1e-10` count as agreeing.
fn rel_error(a: f64, n: f64) -> f64 {
    let scale = a.abs().max(n.abs());
    if scale < 1e-10 {
        0.0
    } else {
        (a - n).abs() / scale
    }
}

/// Compares `analytic` against central differences of the training-mode
/// batch loss on `coords` random trainable coordinates. Coordinates whose
/// probes change the activation pattern are counted in `skipped` instead.
#[allow(clippy::too_many_arguments)]
pub fn numerical_check(
    params: &FeatNetParams,
    cfg: &FeatNetConfig,
    inputs: &[&[f64]],
    labels: &[usize],
    analytic: &FeatNetParams,
    epsilon: f64,
    coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let total = params.n_trainable();
    let coords = coords.min(total);
    let picks = sample(&mut seeded(seed, &[]), total, coords).into_vec();
    let mut report = GradCheckReport { checked: 0, skipped: 0, max_relative_error: 0.0, worst_index: 0 };
    let pattern = activation_pattern(params, cfg, inputs)?;
    let mut probe = params.clone();
    for idx in picks {
        let base = params.trainable_get(idx).ok_or_else(|| Error::invalid("coordinate out of range"))?;
        probe.trainable_set(idx, base + epsilon);
        let (lp, _, _) = loss_and_gradient(&probe, cfg, inputs, labels)?;
        let smooth_p = activation_pattern(&probe, cfg, inputs)? == pattern;
        probe.trainable_set(idx, base - epsilon);
        let (lm, _, _) = loss_and_gradient(&probe, cfg, inputs, labels)?;
        let smooth_m = activation_pattern(&probe, cfg, inputs)? == pattern;
        probe.trainable_set(idx, base);
        if !(smooth_p && smooth_m) {
            report.skipped += 1;
            continue;
        }
        let numeric = (lp - lm) / (2.0 * epsilon);
        let err = rel_error(analytic.trainable_get(idx).unwrap(), numeric);
        report.checked += 1;
        if err > report.max_relative_error {
            report.max_relative_error = err;
            report.worst_index = idx;
        }
    }
    Ok(report)
}

/// Backprop versus finite differences for one batch.
pub fn gradient_check(
    params: &FeatNetParams,
    cfg: &FeatNetConfig,
    inputs: &[&[f64]],
    labels: &[usize],
    epsilon: f64,
    coords: usize,
    seed: u64,
) -> Result<GradCheckReport> {
    let (_, grads, _) = loss_and_gradient(params, cfg, inputs, labels)?;
    numerical_check(params, cfg, inputs, labels, &grads, epsilon, coords, seed)
}
