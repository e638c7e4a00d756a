use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

pub const STATES_PER_PHONE: usize = 3;

const MAGIC: &[u8; 4] = b"GMHM";

/// Diagonal-covariance Gaussian mixture with cached normalizers.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGmm {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    vars: Vec<Vec<f64>>,
    log_consts: Vec<f64>,
    inv_vars: Vec<Vec<f64>>,
}

impl DiagGmm {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> Result<Self> {
        let k = weights.len();
        if k == 0 || means.len() != k || vars.len() != k {
            return Err(Error::Shape(format!(
                "mixture with {k} weights, {} means, {} variances",
                means.len(),
                vars.len()
            )));
        }
        let d = means[0].len();
        if means.iter().chain(&vars).any(|v| v.len() != d) {
            return Err(Error::Shape("mixture components differ in dimension".into()));
        }
        if vars.iter().flatten().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Numerical("non-positive mixture variance".into()));
        }
        let mut g = Self { weights, means, vars, log_consts: vec![], inv_vars: vec![] };
        g.refresh();
        Ok(g)
    }

    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Result<Self> {
        Self::new(vec![1.0], vec![mean], vec![var])
    }

    fn refresh(&mut self) {
        self.inv_vars = self.vars.iter().map(|v| v.iter().map(|x| 1.0 / x).collect()).collect();
        self.log_consts = self
            .weights
            .iter()
            .zip(&self.vars)
            .map(|(&w, v)| {
                w.ln() - 0.5 * (v.len() as f64 * (2.0 * PI).ln() + v.iter().map(|x| x.ln()).sum::<f64>())
            })
            .collect();
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn vars(&self) -> &[Vec<f64>] {
        &self.vars
    }

    pub fn set_means(&mut self, means: Vec<Vec<f64>>) -> Result<()> {
        if means.len() != self.means.len() || means.iter().any(|m| m.len() != self.dim()) {
            return Err(Error::Shape("replacement means do not match the mixture".into()));
        }
        self.means = means;
        Ok(())
    }

    /// Per-component joint log densities `log w_m + log N(x; μ_m, Σ_m)`
    /// written to `out`; returns their log-sum.
    pub fn component_log_likelihoods(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for (m, o) in out.iter_mut().enumerate().take(self.weights.len()) {
            let mu = &self.means[m];
            let iv = &self.inv_vars[m];
            let mut q = 0.0;
            for i in 0..x.len() {
                let e = x[i] - mu[i];
                q += e * e * iv[i];
            }
            *o = self.log_consts[m] - 0.5 * q;
            best = best.max(*o);
        }
        if best == f64::NEG_INFINITY {
            return best;
        }
        let s: f64 = out[..self.weights.len()].iter().map(|v| (v - best).exp()).sum();
        best + s.ln()
    }

    pub fn log_likelihood(&self, x: &[f64]) -> f64 {
        let mut buf = vec![0.0; self.weights.len()];
        self.component_log_likelihoods(x, &mut buf)
    }

    /// Component posteriors of `x`, written to `out`; returns log p(x).
    pub fn posteriors(&self, x: &[f64], out: &mut [f64]) -> f64 {
        let ll = self.component_log_likelihoods(x, out);
        for o in out.iter_mut().take(self.weights.len()) {
            *o = (*o - ll).exp();
        }
        ll
    }

    /// Splits the heaviest components until `target` components exist. Each
    /// split halves the weight and moves the two means by ±0.1 standard
    /// deviations.
    pub fn split_to(&mut self, target: usize) {
        while self.weights.len() < target {
            let (m, _) = self
                .weights
                .iter()
                .enumerate()
                .fold((0, f64::MIN), |acc, (i, &w)| if w > acc.1 { (i, w) } else { acc });
            let w = self.weights[m] / 2.0;
            let delta: Vec<f64> = self.vars[m].iter().map(|v| 0.1 * v.sqrt()).collect();
            let plus: Vec<f64> = self.means[m].iter().zip(&delta).map(|(a, b)| a + b).collect();
            let minus: Vec<f64> = self.means[m].iter().zip(&delta).map(|(a, b)| a - b).collect();
            self.weights[m] = w;
            self.means[m] = minus;
            self.weights.push(w);
            self.means.push(plus);
            self.vars.push(self.vars[m].clone());
        }
        self.refresh();
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmmState {
    /// Self-loop probability; the forward (or exit) probability is its
    /// complement.
    pub self_loop: f64,
    pub gmm: DiagGmm,
}

impl HmmState {
    pub fn log_self(&self) -> f64 {
        self.self_loop.ln()
    }

    pub fn log_next(&self) -> f64 {
        (1.0 - self.self_loop).ln()
    }
}

/// Monophone model: every phone owns three left-to-right states, numbered
/// `phone * 3 + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmHmmModel {
    pub phones: Vec<String>,
    pub states: Vec<HmmState>,
    pub var_floor: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    phones: Vec<String>,
    states_per_phone: usize,
    dim: usize,
    mixtures: Vec<usize>,
}

impl GmmHmmModel {
    pub fn dim(&self) -> usize {
        self.var_floor.len()
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_id(phone: u16, k: usize) -> usize {
        phone as usize * STATES_PER_PHONE + k
    }

    pub fn phone_of_state(state: usize) -> u16 {
        (state / STATES_PER_PHONE) as u16
    }

    /// State sequence of a phone sequence.
    pub fn state_sequence(phones: &[u16]) -> Vec<usize> {
        phones
            .iter()
            .flat_map(|&p| (0..STATES_PER_PHONE).map(move |k| Self::state_id(p, k)))
            .collect()
    }

    pub fn total_components(&self) -> usize {
        self.states.iter().map(|s| s.gmm.n_components()).sum()
    }

    /// Emission log-likelihoods for the listed states, laid out
    /// `[t * states.len() + i]`.
    pub fn emission_table(&self, feats: &FeatureMatrix, states: &[usize]) -> Vec<f64> {
        let k = states.len();
        let max_m = states.iter().map(|&s| self.states[s].gmm.n_components()).max().unwrap_or(1);
        let mut buf = vec![0.0; max_m];
        let mut out = vec![0.0; feats.len() * k];
        for (t, x) in feats.rows().enumerate() {
            for (i, &s) in states.iter().enumerate() {
                out[t * k + i] = self.states[s].gmm.component_log_likelihoods(x, &mut buf);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        if self.states.len() != self.phones.len() * STATES_PER_PHONE {
            return Err(Error::Shape(format!(
                "{} states for {} phones",
                self.states.len(),
                self.phones.len()
            )));
        }
        let d = self.dim();
        for (i, s) in self.states.iter().enumerate() {
            if !(s.self_loop > 0.0 && s.self_loop < 1.0) {
                return Err(Error::Numerical(format!("state {i} self-loop {} outside (0,1)", s.self_loop)));
            }
            if s.gmm.dim() != d {
                return Err(Error::Shape(format!("state {i} has dimension {}", s.gmm.dim())));
            }
            let wsum: f64 = s.gmm.weights().iter().sum();
            if (wsum - 1.0).abs() > 1e-6 {
                return Err(Error::Numerical(format!("state {i} weights sum to {wsum}")));
            }
            for v in s.gmm.vars() {
                if v.iter().zip(&self.var_floor).any(|(a, f)| *a < f * (1.0 - 1e-6)) {
                    return Err(Error::Numerical(format!("state {i} variance below floor")));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            phones: self.phones.clone(),
            states_per_phone: STATES_PER_PHONE,
            dim: self.dim(),
            mixtures: self.states.iter().map(|s| s.gmm.n_components()).collect(),
        };
        let json = serde_json::to_vec(&header).map_err(|e| Error::invalid(e.to_string()))?;
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        let mut put = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
        for &f in &self.var_floor {
            put(f);
        }
        for s in &self.states {
            put(s.self_loop);
            for m in 0..s.gmm.n_components() {
                put(s.gmm.weights[m]);
                s.gmm.means[m].iter().for_each(|&v| put(v));
                s.gmm.vars[m].iter().for_each(|&v| put(v));
            }
        }
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ctx = path.display().to_string();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() < 8 || &bytes[..4] != MAGIC {
            return Err(Error::parse(ctx, "not a GMHM model file"));
        }
        let hlen = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        let body = bytes.get(8..8 + hlen).ok_or_else(|| Error::parse(&ctx, "truncated header"))?;
        let header: Header = serde_json::from_slice(body).map_err(|e| Error::parse(&ctx, e.to_string()))?;
        if header.states_per_phone != STATES_PER_PHONE
            || header.mixtures.len() != header.phones.len() * STATES_PER_PHONE
        {
            return Err(Error::parse(&ctx, "unsupported topology"));
        }
        let blob = &bytes[8 + hlen..];
        let d = header.dim;
        let expected = 4 * (d + header.mixtures.iter().map(|m| 1 + m * (1 + 2 * d)).sum::<usize>());
        if blob.len() != expected {
            return Err(Error::parse(&ctx, format!("parameter blob has {} bytes, expected {expected}", blob.len())));
        }
        let mut vals = blob.chunks_exact(4).map(|c| f64::from(f32::from_le_bytes(c.try_into().unwrap())));
        let mut take = |n: usize| -> Vec<f64> { (&mut vals).take(n).collect() };
        let var_floor = take(d);
        let mut states = Vec::with_capacity(header.mixtures.len());
        for &k in &header.mixtures {
            let self_loop = take(1)[0];
            let (mut w, mut mu, mut var) = (vec![], vec![], vec![]);
            for _ in 0..k {
                w.push(take(1)[0]);
                mu.push(take(d));
                var.push(take(d).iter().zip(&var_floor).map(|(v, f)| v.max(*f)).collect());
            }
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let gmm = DiagGmm::new(w, mu, var).map_err(|e| Error::parse(&ctx, e.to_string()))?;
            states.push(HmmState { self_loop, gmm });
        }
        let model = Self { phones: header.phones, states, var_floor };
        model.validate().map_err(|e| Error::parse(&ctx, e.to_string()))?;
        Ok(model)
    }
}
