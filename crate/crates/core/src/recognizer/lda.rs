use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

const WITHIN_RIDGE: f64 = 1e-6;

/// Linear projection `y = W (x - mean)` with rows sorted by discriminative
/// power.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LdaTransform {
    pub d_in: usize,
    pub d_out: usize,
    /// Row-major d_out×d_in.
    pub matrix: Vec<f64>,
    pub mean: Vec<f64>,
    /// Generalized eigenvalues of the kept directions.
    pub eigenvalues: Vec<f64>,
    pub class_counts: BTreeMap<usize, usize>,
}

impl LdaTransform {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.matrix[i * self.d_in..(i + 1) * self.d_in]
    }

    pub fn apply(&self, feats: &FeatureMatrix) -> Result<FeatureMatrix> {
        if feats.dim() != self.d_in {
            return Err(Error::Shape(format!("LDA expects dim {}, got {}", self.d_in, feats.dim())));
        }
        let mut centered = vec![0.0; self.d_in];
        Ok(feats.map_rows(self.d_out, |x, y| {
            for i in 0..self.d_in {
                centered[i] = x[i] - self.mean[i];
            }
            for (o, yo) in y.iter_mut().enumerate() {
                *yo = self.row(o).iter().zip(&centered).map(|(a, b)| a * b).sum();
            }
        }))
    }
}

/// Fisher LDA. `labels[u][t]` is the class of frame `t` of utterance `u`;
/// classes with fewer than two frames are ignored. The within-class scatter
/// gets a small ridge so a singular estimate still factorizes.
pub fn estimate_lda(feats: &[FeatureMatrix], labels: &[Vec<usize>], d_out: usize) -> Result<LdaTransform> {
    if feats.len() != labels.len() {
        return Err(Error::Shape("features and labels differ in count".into()));
    }
    let d = feats.first().map(|f| f.dim()).ok_or_else(|| Error::invalid("no features for LDA"))?;
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    let mut sums: BTreeMap<usize, DVector<f64>> = BTreeMap::new();
    for (f, l) in feats.iter().zip(labels) {
        if f.len() != l.len() || f.dim() != d {
            return Err(Error::Shape("label count or dimension mismatch".into()));
        }
        for (x, &c) in f.rows().zip(l) {
            *counts.entry(c).or_default() += 1;
            *sums.entry(c).or_insert_with(|| DVector::zeros(d)) += DVector::from_column_slice(x);
        }
    }
    counts.retain(|_, n| *n >= 2);
    if counts.len() < 2 {
        return Err(Error::invalid("LDA needs at least two classes with two frames each"));
    }
    if d_out == 0 || d_out > d {
        return Err(Error::invalid(format!("LDA output dimension {d_out} not in 1..={d}")));
    }
    let means: BTreeMap<usize, DVector<f64>> =
        counts.iter().map(|(&c, &n)| (c, &sums[&c] / n as f64)).collect();
    let n_total: usize = counts.values().sum();
    let mut mu = DVector::zeros(d);
    for c in counts.keys() {
        mu += &sums[c];
    }
    mu /= n_total as f64;

    let mut sw = DMatrix::<f64>::zeros(d, d);
    for (f, l) in feats.iter().zip(labels) {
        for (x, c) in f.rows().zip(l) {
            if let Some(m) = means.get(c) {
                let e = DVector::from_column_slice(x) - m;
                sw.ger(1.0, &e, &e, 1.0);
            }
        }
    }
    sw /= n_total as f64;
    let mut sb = DMatrix::<f64>::zeros(d, d);
    for (c, &n) in &counts {
        let e = &means[c] - &mu;
        sb.ger(n as f64 / n_total as f64, &e, &e, 1.0);
    }
    let ridge = WITHIN_RIDGE * (sw.trace() / d as f64).max(f64::MIN_POSITIVE);
    for i in 0..d {
        sw[(i, i)] += ridge;
    }
    let chol = sw
        .cholesky()
        .ok_or_else(|| Error::Numerical("within-class scatter is not positive definite".into()))?;
    let l_inv = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("within-class Cholesky factor is singular".into()))?;
    let m = &l_inv * &sb * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut matrix = Vec::with_capacity(d_out * d);
    let mut eigenvalues = Vec::with_capacity(d_out);
    for &k in order.iter().take(d_out) {
        // Generalized eigenvector v = L⁻ᵀ u, normalized so vᵀ Sw v = 1.
        let v = l_inv.transpose() * eig.eigenvectors.column(k);
        matrix.extend(v.iter().copied());
        eigenvalues.push(eig.eigenvalues[k]);
    }
    Ok(LdaTransform {
        d_in: d,
        d_out,
        matrix,
        mean: mu.iter().copied().collect(),
        eigenvalues,
        class_counts: counts,
    })
}
