use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::FeatNetConfig;
use crate::error::Result;
use crate::rng::seeded;

/// Valid convolution; `w` is row-major `out × (in·k·k)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvLayer {
    pub out_c: usize,
    pub in_c: usize,
    pub k: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

/// Fully connected layer; `w` is row-major `out × in`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub out: usize,
    pub inp: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// The classifier layers are `fc_dims` followed by the `n_classes` output.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatNetParams {
    pub conv: Vec<ConvLayer>,
    pub bn: BatchNorm,
    pub fc: Vec<Dense>,
}

/// Named tensor in declaration order.
pub struct Tensor<'a> {
    pub name: String,
    pub data: &'a [f64],
    pub trainable: bool,
    pub decayed: bool,
}

impl FeatNetParams {
    pub fn zeros_like(cfg: &FeatNetConfig) -> Result<Self> {
        let mut p = init_params(cfg, 0)?;
        for t in p.all_tensors_mut() {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(p)
    }

    /// Every tensor in declaration order, running moments included.
    pub fn tensors(&self) -> Vec<Tensor<'_>> {
        fn t(name: String, data: &[f64], trainable: bool, decayed: bool) -> Tensor<'_> {
            Tensor { name, data, trainable, decayed }
        }
        let mut out = vec![];
        for (i, c) in self.conv.iter().enumerate() {
            out.push(t(format!("conv{i}.w"), &c.w, true, true));
            out.push(t(format!("conv{i}.b"), &c.b, true, false));
        }
        out.push(t("bn.gamma".into(), &self.bn.gamma, true, false));
        out.push(t("bn.beta".into(), &self.bn.beta, true, false));
        out.push(t("bn.running_mean".into(), &self.bn.running_mean, false, false));
        out.push(t("bn.running_var".into(), &self.bn.running_var, false, false));
        for (i, d) in self.fc.iter().enumerate() {
            out.push(t(format!("fc{i}.w"), &d.w, true, true));
            out.push(t(format!("fc{i}.b"), &d.b, true, false));
        }
        out
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut v = vec![];
        for c in self.conv.iter_mut() {
            v.push(&mut c.w);
            v.push(&mut c.b);
        }
        v.push(&mut self.bn.gamma);
        v.push(&mut self.bn.beta);
        v.push(&mut self.bn.running_mean);
        v.push(&mut self.bn.running_var);
        for d in self.fc.iter_mut() {
            v.push(&mut d.w);
            v.push(&mut d.b);
        }
        v
    }

    /// Trainable tensors with their weight-decay flag, in declaration order.
    pub fn trainable_mut(&mut self) -> Vec<(&mut Vec<f64>, bool)> {
        let mut v = vec![];
        for c in self.conv.iter_mut() {
            v.push((&mut c.w, true));
            v.push((&mut c.b, false));
        }
        v.push((&mut self.bn.gamma, false));
        v.push((&mut self.bn.beta, false));
        for d in self.fc.iter_mut() {
            v.push((&mut d.w, true));
            v.push((&mut d.b, false));
        }
        v
    }

    pub fn n_trainable(&self) -> usize {
        self.tensors().iter().filter(|t| t.trainable).map(|t| t.data.len()).sum()
    }

    /// `½ Σ w²` over conv and fc weights.
    pub fn half_sq_weights(&self) -> f64 {
        self.tensors()
            .iter()
            .filter(|t| t.decayed)
            .map(|t| 0.5 * t.data.iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Trainable scalar `index` in declaration order.
    pub fn trainable_get(&self, mut index: usize) -> Option<f64> {
        for t in self.tensors().into_iter().filter(|t| t.trainable) {
            if index < t.data.len() {
                return Some(t.data[index]);
            }
            index -= t.data.len();
        }
        None
    }

    pub fn trainable_set(&mut self, mut index: usize, value: f64) -> bool {
        for (t, _) in self.trainable_mut() {
            if index < t.len() {
                t[index] = value;
                return true;
            }
            index -= t.len();
        }
        false
    }
}

fn he(n: usize, fan_in: usize, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = seeded(seed, &[stream]);
    let dist = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
    (0..n).map(|_| dist.sample(&mut rng)).collect()
}

/// He fan-in initialization: weights ~ N(0, 2/fan_in), zero biases,
/// batch-norm scale 1 and shift 0, running variance 1.
pub fn init_params(cfg: &FeatNetConfig, seed: u64) -> Result<FeatNetParams> {
    cfg.validate()?;
    let shapes = cfg.conv_shapes()?;
    let k = cfg.conv_kernel;
    let conv = cfg
        .conv_filters
        .iter()
        .enumerate()
        .map(|(i, &out_c)| {
            let in_c = shapes[i][0];
            let fan_in = in_c * k * k;
            ConvLayer { out_c, in_c, k, w: he(out_c * fan_in, fan_in, seed, i as u64), b: vec![0.0; out_c] }
        })
        .collect();
    let flat = cfg.flat_dim()?;
    let bn = BatchNorm {
        gamma: vec![1.0; flat],
        beta: vec![0.0; flat],
        running_mean: vec![0.0; flat],
        running_var: vec![1.0; flat],
    };
    let mut dims = vec![flat];
    dims.extend(&cfg.fc_dims);
    dims.push(cfg.n_classes);
    let fc = dims
        .windows(2)
        .enumerate()
        .map(|(i, d)| Dense {
            out: d[1],
            inp: d[0],
            w: he(d[0] * d[1], d[0], seed, 100 + i as u64),
            b: vec![0.0; d[1]],
        })
        .collect();
    Ok(FeatNetParams { conv, bn, fc })
}
