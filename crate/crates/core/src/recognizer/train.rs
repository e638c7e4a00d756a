use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{forced_align_states, Alignment, DiagGmm, FeatureMatrix, GmmHmmModel, HmmState, STATES_PER_PHONE};
use crate::error::{Error, Result};

const MIN_SELF_LOOP: f64 = 0.01;
const MAX_SELF_LOOP: f64 = 0.99;
const MIN_WEIGHT: f64 = 1e-5;
const MIN_COMPONENT_OCC: f64 = 1e-6;
const CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmSchedule {
    pub iterations: usize,
    /// Components per state reached by repeated doubling.
    pub target_mixtures: usize,
    /// Double the mixture count after every this many iterations.
    pub split_every: usize,
}

impl Default for EmSchedule {
    fn default() -> Self {
        Self { iterations: 10, target_mixtures: 1, split_every: 2 }
    }
}

/// Per-iteration Viterbi log-likelihood of the training data and the total
/// component count of the model that produced it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EmReport {
    pub log_likelihoods: Vec<f64>,
    pub components: Vec<usize>,
}

impl EmReport {
    /// Consecutive iteration pairs at equal component count whose
    /// log-likelihood dropped by more than `rel` relative slack.
    pub fn monotonicity_violations(&self, rel: f64) -> usize {
        (1..self.log_likelihoods.len())
            .filter(|&i| self.components[i] == self.components[i - 1])
            .filter(|&i| {
                let (a, b) = (self.log_likelihoods[i - 1], self.log_likelihoods[i]);
                b < a - rel * a.abs().max(1.0)
            })
            .count()
    }

    pub fn comparable_pairs(&self) -> usize {
        (1..self.components.len())
            .filter(|&i| self.components[i] == self.components[i - 1])
            .count()
    }
}

fn global_stats(feats: &[FeatureMatrix]) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = feats.first().map(|f| f.dim()).ok_or_else(|| Error::invalid("no training features"))?;
    let mut n = 0.0;
    let mut sum = vec![0.0; d];
    let mut sq = vec![0.0; d];
    for f in feats {
        if f.dim() != d {
            return Err(Error::Shape("training features differ in dimension".into()));
        }
        for x in f.rows() {
            n += 1.0;
            for i in 0..d {
                sum[i] += x[i];
                sq[i] += x[i] * x[i];
            }
        }
    }
    if n == 0.0 {
        return Err(Error::invalid("no training frames"));
    }
    let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let var: Vec<f64> = sq.iter().zip(&mean).map(|(q, m)| (q / n - m * m).max(1e-12)).collect();
    Ok((mean, var))
}

fn path_score(model: &GmmHmmModel, feats: &FeatureMatrix, states: &[usize]) -> f64 {
    let mut s = 0.0;
    for (t, x) in feats.rows().enumerate() {
        let st = &model.states[states[t]];
        s += st.gmm.log_likelihood(x);
        s += if t + 1 < states.len() && states[t + 1] == states[t] { st.log_self() } else { st.log_next() };
    }
    s
}

/// Uniform segmentation: with `n` states over `T` frames every state gets
/// `T / n` frames and the last `T mod n` states one extra.
fn uniform_states(chain: &[usize], t_len: usize) -> Result<Vec<usize>> {
    let n = chain.len();
    if n == 0 || t_len < n {
        return Err(Error::invalid(format!("{t_len} frames cannot cover {n} states")));
    }
    let (base, rem) = (t_len / n, t_len % n);
    let mut out = Vec::with_capacity(t_len);
    for (j, &s) in chain.iter().enumerate() {
        let len = base + usize::from(j >= n - rem);
        out.extend(std::iter::repeat_n(s, len));
    }
    Ok(out)
}

/// Flat start: every state is a single Gaussian at the global mean and
/// variance, and each utterance is divided uniformly over its state chain.
pub fn flat_start(
    phones: &[String],
    transcripts: &[Vec<u16>],
    feats: &[FeatureMatrix],
    var_floor_ratio: f64,
) -> Result<(GmmHmmModel, Vec<Alignment>)> {
    if transcripts.len() != feats.len() {
        return Err(Error::Shape(format!("{} transcripts for {} feature files", transcripts.len(), feats.len())));
    }
    let (mean, var) = global_stats(feats)?;
    let var_floor: Vec<f64> = var.iter().map(|v| v * var_floor_ratio).collect();
    let gmm = DiagGmm::single(mean, var)?;
    let states = vec![HmmState { self_loop: 0.5, gmm }; phones.len() * STATES_PER_PHONE];
    let mut model = GmmHmmModel { phones: phones.to_vec(), states, var_floor };
    let mut paths = Vec::with_capacity(feats.len());
    for (tr, f) in transcripts.iter().zip(feats) {
        if let Some(p) = tr.iter().find(|&&p| p as usize >= phones.len()) {
            return Err(Error::invalid(format!("phone index {p} outside inventory")));
        }
        paths.push(uniform_states(&GmmHmmModel::state_sequence(tr), f.len())?);
    }
    let trans = TransitionCounts::from_paths(model.n_states(), &paths);
    trans.apply(&mut model);
    let alignments = paths
        .into_iter()
        .zip(feats)
        .map(|(states, f)| Alignment { log_likelihood: path_score(&model, f, &states), states })
        .collect();
    Ok((model, alignments))
}

struct TransitionCounts {
    stay: Vec<f64>,
    leave: Vec<f64>,
}

impl TransitionCounts {
    fn from_paths<'a>(n_states: usize, paths: impl IntoIterator<Item = &'a Vec<usize>>) -> Self {
        let mut c = Self { stay: vec![0.0; n_states], leave: vec![0.0; n_states] };
        for p in paths {
            for t in 0..p.len() {
                if t + 1 < p.len() && p[t + 1] == p[t] {
                    c.stay[p[t]] += 1.0;
                } else {
                    c.leave[p[t]] += 1.0;
                }
            }
        }
        c
    }

    fn apply(&self, model: &mut GmmHmmModel) {
        for (s, st) in model.states.iter_mut().enumerate() {
            let total = self.stay[s] + self.leave[s];
            if total > 0.0 {
                st.self_loop = (self.stay[s] / total).clamp(MIN_SELF_LOOP, MAX_SELF_LOOP);
            }
        }
    }
}

/// Zeroth, first and second order statistics per state component.
#[derive(Clone)]
struct GmmStats {
    occ: Vec<Vec<f64>>,
    sum: Vec<Vec<Vec<f64>>>,
    sq: Vec<Vec<Vec<f64>>>,
}

impl GmmStats {
    fn zeros(model: &GmmHmmModel) -> Self {
        let d = model.dim();
        let shape = |s: &HmmState| s.gmm.n_components();
        Self {
            occ: model.states.iter().map(|s| vec![0.0; shape(s)]).collect(),
            sum: model.states.iter().map(|s| vec![vec![0.0; d]; shape(s)]).collect(),
            sq: model.states.iter().map(|s| vec![vec![0.0; d]; shape(s)]).collect(),
        }
    }

    fn accumulate(&mut self, model: &GmmHmmModel, feats: &FeatureMatrix, states: &[usize]) {
        let mut post = vec![0.0; 64];
        for (x, &s) in feats.rows().zip(states) {
            let gmm = &model.states[s].gmm;
            if post.len() < gmm.n_components() {
                post.resize(gmm.n_components(), 0.0);
            }
            gmm.posteriors(x, &mut post);
            for m in 0..gmm.n_components() {
                let g = post[m];
                if g == 0.0 {
                    continue;
                }
                self.occ[s][m] += g;
                let (sm, sq) = (&mut self.sum[s][m], &mut self.sq[s][m]);
                for i in 0..x.len() {
                    sm[i] += g * x[i];
                    sq[i] += g * x[i] * x[i];
                }
            }
        }
    }

    fn add(&mut self, o: &GmmStats) {
        for s in 0..self.occ.len() {
            for m in 0..self.occ[s].len() {
                self.occ[s][m] += o.occ[s][m];
                for i in 0..self.sum[s][m].len() {
                    self.sum[s][m][i] += o.sum[s][m][i];
                    self.sq[s][m][i] += o.sq[s][m][i];
                }
            }
        }
    }
}

/// Ordered-chunk parallel accumulation so the reduction order does not
/// depend on scheduling.
fn collect_stats(model: &GmmHmmModel, feats: &[FeatureMatrix], alignments: &[Alignment]) -> GmmStats {
    let idx: Vec<usize> = (0..feats.len()).collect();
    let partial: Vec<GmmStats> = idx
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut st = GmmStats::zeros(model);
            for &u in chunk {
                st.accumulate(model, &feats[u], &alignments[u].states);
            }
            st
        })
        .collect();
    let mut total = GmmStats::zeros(model);
    for p in &partial {
        total.add(p);
    }
    total
}

/// One M-step from hard state assignments: transitions from the paths, and
/// for each state one EM update of its mixture using posteriors under the
/// current parameters. Unoccupied states keep their parameters.
pub fn reestimate(model: &GmmHmmModel, feats: &[FeatureMatrix], alignments: &[Alignment]) -> Result<GmmHmmModel> {
    let stats = collect_stats(model, feats, alignments);
    let mut out = model.clone();
    TransitionCounts::from_paths(model.n_states(), alignments.iter().map(|a| &a.states)).apply(&mut out);
    for (s, st) in out.states.iter_mut().enumerate() {
        let total: f64 = stats.occ[s].iter().sum();
        if total <= 0.0 {
            continue;
        }
        let old = &model.states[s].gmm;
        let k = old.n_components();
        let mut weights = Vec::with_capacity(k);
        let mut means = Vec::with_capacity(k);
        let mut vars = Vec::with_capacity(k);
        for m in 0..k {
            let occ = stats.occ[s][m];
            if occ < MIN_COMPONENT_OCC {
                weights.push(MIN_WEIGHT);
                means.push(old.means()[m].clone());
                vars.push(old.vars()[m].clone());
                continue;
            }
            let mu: Vec<f64> = stats.sum[s][m].iter().map(|v| v / occ).collect();
            let var: Vec<f64> = stats.sq[s][m]
                .iter()
                .zip(&mu)
                .zip(&model.var_floor)
                .map(|((q, u), f)| (q / occ - u * u).max(*f))
                .collect();
            weights.push((occ / total).max(MIN_WEIGHT));
            means.push(mu);
            vars.push(var);
        }
        let wsum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= wsum);
        st.gmm = DiagGmm::new(weights, means, vars)?;
    }
    Ok(out)
}

/// Single-Gaussian model estimated directly from state alignments of
/// `feats`; states without frames fall back to the global statistics.
pub fn init_from_alignments(
    phones: &[String],
    feats: &[FeatureMatrix],
    alignments: &[Alignment],
    var_floor_ratio: f64,
) -> Result<GmmHmmModel> {
    let (mean, var) = global_stats(feats)?;
    let var_floor: Vec<f64> = var.iter().map(|v| v * var_floor_ratio).collect();
    let states = vec![HmmState { self_loop: 0.5, gmm: DiagGmm::single(mean, var)? }; phones.len() * STATES_PER_PHONE];
    let flat = GmmHmmModel { phones: phones.to_vec(), states, var_floor };
    reestimate(&flat, feats, alignments)
}

pub fn realign(
    model: &GmmHmmModel,
    feats: &[FeatureMatrix],
    alignments: &[Alignment],
) -> Result<Vec<Alignment>> {
    feats
        .par_iter()
        .zip(alignments)
        .map(|(f, a)| forced_align_states(model, f, &chain_of(&a.states)))
        .collect()
}

/// Collapses a frame-level path back into its state chain.
pub(crate) fn chain_of(states: &[usize]) -> Vec<usize> {
    let mut c: Vec<usize> = Vec::new();
    for (t, &s) in states.iter().enumerate() {
        if t == 0 || states[t - 1] != s {
            c.push(s);
        }
    }
    c
}

/// Viterbi EM: re-estimate from the current alignments, split mixtures per
/// the schedule, realign. Returns the updated model and alignments with the
/// per-iteration data log-likelihood.
pub fn train_em(
    model: &GmmHmmModel,
    feats: &[FeatureMatrix],
    alignments: &[Alignment],
    schedule: &EmSchedule,
) -> Result<(GmmHmmModel, Vec<Alignment>, EmReport)> {
    if feats.len() != alignments.len() {
        return Err(Error::Shape("features and alignments differ in count".into()));
    }
    let mut model = model.clone();
    let mut alignments = alignments.to_vec();
    let mut report = EmReport::default();
    for it in 0..schedule.iterations {
        model = reestimate(&model, feats, &alignments)?;
        let last = it + 1 == schedule.iterations;
        if !last && schedule.split_every > 0 && (it + 1) % schedule.split_every == 0 {
            for st in &mut model.states {
                let k = st.gmm.n_components();
                if k < schedule.target_mixtures {
                    st.gmm.split_to((2 * k).min(schedule.target_mixtures));
                }
            }
        }
        alignments = realign(&model, feats, &alignments)?;
        let ll: f64 = alignments.iter().map(|a| a.log_likelihood).sum();
        if !ll.is_finite() {
            return Err(Error::Numerical(format!("EM iteration {it} log-likelihood is {ll}")));
        }
        log::debug!("em iteration {it}: log-likelihood {ll:.3}, {} components", model.total_components());
        report.log_likelihoods.push(ll);
        report.components.push(model.total_components());
    }
    Ok((model, alignments, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_division() {
        let chain: Vec<usize> = (0..10).collect();
        let s = uniform_states(&chain, 30).unwrap();
        for j in 0..10 {
            assert_eq!(s.iter().filter(|&&x| x == j).count(), 3);
        }
        let s = uniform_states(&[0, 1, 2], 8).unwrap();
        assert_eq!(s, vec![0, 0, 1, 1, 1, 2, 2, 2]);
        assert!(uniform_states(&[0, 1, 2], 2).is_err());
    }

    #[test]
    fn chain_round_trip() {
        assert_eq!(chain_of(&[3, 3, 4, 5, 5, 5]), vec![3, 4, 5]);
    }
}
