use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::net::{infer_batch, update_running};
use super::{loss_and_gradient, FeatNetConfig, FeatNetParams, SampleSet};
use crate::error::{Error, Result};
use crate::rng::seeded;

const EVAL_CHUNK: usize = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_accuracy: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochMetrics>,
    /// Index into `epochs` of the returned parameters.
    pub best_epoch: usize,
}

/// Frame-level accuracy in inference mode.
pub fn accuracy(params: &FeatNetParams, cfg: &FeatNetConfig, set: &SampleSet) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::invalid("empty evaluation set"));
    }
    let idx: Vec<usize> = (0..set.len()).collect();
    let correct: Vec<usize> = idx
        .par_chunks(EVAL_CHUNK)
        .map(|chunk| {
            let inputs: Vec<Vec<f64>> = chunk.iter().map(|&i| set.input(i)).collect();
            let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
            let outs = infer_batch(params, cfg, &refs)?;
            Ok(chunk
                .iter()
                .zip(outs)
                .filter(|(&i, o)| argmax(&o.logits) == set.label(i) as usize)
                .count())
        })
        .collect::<Result<_>>()?;
    Ok(correct.iter().sum::<usize>() as f64 / set.len() as f64)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

/// Minibatch SGD without momentum. After every epoch the validation
/// accuracy is recorded; the parameters of the best epoch are returned
/// (ties keep the earlier epoch). A trailing batch of one sample is
/// skipped because batch normalization needs two.
pub fn train_sgd(
    params: &FeatNetParams,
    cfg: &FeatNetConfig,
    train: &SampleSet,
    valid: &SampleSet,
) -> Result<(FeatNetParams, TrainHistory)> {
    cfg.validate()?;
    if train.is_empty() || valid.is_empty() {
        return Err(Error::invalid("training and validation sets must be nonempty"));
    }
    let mut params = params.clone();
    let mut best: Option<(f64, FeatNetParams)> = None;
    let mut history = TrainHistory::default();
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train.len()).collect();
        order.shuffle(&mut seeded(cfg.seed, &[epoch as u64]));
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            if batch.len() < 2 {
                continue;
            }
            let inputs: Vec<Vec<f64>> = batch.iter().map(|&i| train.input(i)).collect();
            let refs: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train.label(i) as usize).collect();
            let (loss, grads, (mean, var)) = loss_and_gradient(&params, cfg, &refs, &labels)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!("training loss became {loss} in epoch {epoch}")));
            }
            loss_sum += loss;
            batches += 1;
            let mut grads = grads;
            for ((p, _), (g, _)) in params.trainable_mut().into_iter().zip(grads.trainable_mut()) {
                for (a, b) in p.iter_mut().zip(g.iter()) {
                    *a -= cfg.lr * b;
                }
            }
            update_running(&mut params, cfg, &mean, &var, batch.len());
        }
        let valid_accuracy = accuracy(&params, cfg, valid)?;
        let train_loss = if batches > 0 { loss_sum / batches as f64 } else { f64::NAN };
        log::info!("featnet epoch {epoch}: loss {train_loss:.4}, validation accuracy {valid_accuracy:.4}");
        history.epochs.push(EpochMetrics { epoch, train_loss, valid_accuracy });
        if best.as_ref().is_none_or(|(acc, _)| valid_accuracy > *acc) {
            history.best_epoch = epoch;
            best = Some((valid_accuracy, params.clone()));
        }
    }
    let out = best.map(|(_, p)| p).unwrap_or(params);
    Ok((out, history))
}
