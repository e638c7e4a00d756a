use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FeatureMatrix, GmmHmmModel};
use crate::error::{Error, Result};

/// Per-speaker affine feature transform `x̂ = A x + b`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmllrTransform {
    pub speaker: String,
    pub dim: usize,
    /// Row-major d×d.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl FmllrTransform {
    pub fn identity(speaker: impl Into<String>, dim: usize) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self { speaker: speaker.into(), dim, a, b: vec![0.0; dim] }
    }

    pub fn from_parts(speaker: impl Into<String>, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        let d = a.nrows();
        if a.ncols() != d || b.len() != d {
            return Err(Error::Shape("fMLLR A must be square and match b".into()));
        }
        let t = Self {
            speaker: speaker.into(),
            dim: d,
            a: (0..d).flat_map(|i| (0..d).map(move |j| a[(i, j)])).collect(),
            b: b.iter().copied().collect(),
        };
        t.check_invertible()?;
        Ok(t)
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.a)
    }

    pub fn check_invertible(&self) -> Result<()> {
        let det = self.matrix().determinant();
        if !(det.abs() > 1e-12) {
            return Err(Error::Numerical(format!("fMLLR transform has determinant {det}")));
        }
        Ok(())
    }

    pub fn apply(&self, feats: &FeatureMatrix) -> Result<FeatureMatrix> {
        if feats.dim() != self.dim {
            return Err(Error::Shape(format!("fMLLR of dim {} applied to dim {}", self.dim, feats.dim())));
        }
        let d = self.dim;
        Ok(feats.map_rows(d, |x, y| {
            for i in 0..d {
                let row = &self.a[i * d..(i + 1) * d];
                y[i] = self.b[i] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
            }
        }))
    }

    pub fn inverse(&self) -> Result<Self> {
        let inv = self
            .matrix()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("fMLLR transform is singular".into()))?;
        let b = -(&inv * DVector::from_column_slice(&self.b));
        Self::from_parts(self.speaker.clone(), &inv, &b)
    }

    pub fn frobenius_from_identity(&self) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                let e = self.a[i * d + j] - if i == j { 1.0 } else { 0.0 };
                s += e * e;
            }
        }
        s.sqrt()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FmllrOptions {
    /// Outer iterations; each recomputes component posteriors under the
    /// current transform.
    pub iterations: usize,
    /// Sweeps over all rows per outer iteration.
    pub row_sweeps: usize,
}

impl Default for FmllrOptions {
    fn default() -> Self {
        Self { iterations: 3, row_sweeps: 5 }
    }
}

/// Diagnostics of one estimation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FmllrStats {
    pub frames: usize,
    /// `true` when too few frames were available and identity was returned.
    pub fallback_identity: bool,
    /// Auxiliary value at the start of each outer iteration followed by its
    /// value after every row update of that iteration.
    pub aux_trace: Vec<Vec<f64>>,
}

impl FmllrStats {
    /// Row updates that lowered the auxiliary function by more than `tol`.
    pub fn aux_decreases(&self, tol: f64) -> usize {
        self.aux_trace
            .iter()
            .flat_map(|tr| tr.windows(2).filter(|w| w[1] < w[0] - tol * w[0].abs().max(1.0)))
            .count()
    }
}

struct Accum {
    beta: f64,
    g: Vec<DMatrix<f64>>,
    k: Vec<DVector<f64>>,
}

fn accumulate(
    model: &GmmHmmModel,
    feats: &[&FeatureMatrix],
    alignments: &[Vec<usize>],
    current: &FmllrTransform,
) -> Accum {
    let d = model.dim();
    let mut acc = Accum {
        beta: 0.0,
        g: vec![DMatrix::zeros(d + 1, d + 1); d],
        k: vec![DVector::zeros(d + 1); d],
    };
    let mut post = vec![0.0; 64];
    let mut xt = vec![0.0; d];
    let mut xi = DVector::zeros(d + 1);
    xi[d] = 1.0;
    for (f, states) in feats.iter().zip(alignments) {
        for (x, &s) in f.rows().zip(states) {
            for i in 0..d {
                let row = &current.a[i * d..(i + 1) * d];
                xt[i] = current.b[i] + row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>();
                xi[i] = x[i];
            }
            let gmm = &model.states[s].gmm;
            if post.len() < gmm.n_components() {
                post.resize(gmm.n_components(), 0.0);
            }
            gmm.posteriors(&xt, &mut post);
            acc.beta += 1.0;
            for i in 0..d {
                let mut c = 0.0;
                let mut km = 0.0;
                for m in 0..gmm.n_components() {
                    let w = post[m] / gmm.vars()[m][i];
                    c += w;
                    km += w * gmm.means()[m][i];
                }
                acc.g[i].ger(c, &xi, &xi, 1.0);
                acc.k[i].axpy(km, &xi, 1.0);
            }
        }
    }
    acc
}

/// `W = [A b]` stored as d rows of length d+1.
fn aux(acc: &Accum, w: &DMatrix<f64>) -> f64 {
    let d = w.nrows();
    let a = w.columns(0, d).into_owned();
    let mut q = acc.beta * a.determinant().abs().ln();
    for i in 0..d {
        let wi = w.row(i).transpose();
        q += wi.dot(&acc.k[i]) - 0.5 * (wi.transpose() * &acc.g[i] * &wi)[(0, 0)];
    }
    q
}

/// Constrained MLLR estimate for one speaker by iterated row-wise updates
/// from identity. `alignments[u][t]` is the state of frame `t` of
/// utterance `u`. Fewer than d·(d+1) frames yields identity.
pub fn estimate_fmllr(
    model: &GmmHmmModel,
    feats: &[&FeatureMatrix],
    alignments: &[Vec<usize>],
    speaker: &str,
    opts: &FmllrOptions,
) -> Result<(FmllrTransform, FmllrStats)> {
    let d = model.dim();
    if feats.len() != alignments.len() {
        return Err(Error::Shape("features and alignments differ in count".into()));
    }
    let mut frames = 0;
    for (f, a) in feats.iter().zip(alignments) {
        if f.dim() != d || f.len() != a.len() {
            return Err(Error::Shape("adaptation features do not match model or alignment".into()));
        }
        frames += f.len();
    }
    let mut stats = FmllrStats { frames, ..Default::default() };
    let mut current = FmllrTransform::identity(speaker, d);
    if frames < d * (d + 1) {
        log::warn!("speaker {speaker}: {frames} frames is too few for fMLLR, using identity");
        stats.fallback_identity = true;
        return Ok((current, stats));
    }
    let mut w = DMatrix::<f64>::zeros(d, d + 1);
    for i in 0..d {
        w[(i, i)] = 1.0;
    }
    for _ in 0..opts.iterations {
        let acc = accumulate(model, feats, alignments, &current);
        let g_inv: Vec<DMatrix<f64>> = acc
            .g
            .iter()
            .map(|g| {
                g.clone()
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("singular fMLLR row statistics".into()))
            })
            .collect::<Result<_>>()?;
        let mut trace = vec![aux(&acc, &w)];
        for _ in 0..opts.row_sweeps {
            for i in 0..d {
                let a = w.columns(0, d).into_owned();
                let a_inv = a
                    .try_inverse()
                    .ok_or_else(|| Error::Numerical("fMLLR transform became singular".into()))?;
                // Cofactor row i is proportional to column i of A⁻¹; the
                // update is invariant to that scale.
                let mut p = DVector::zeros(d + 1);
                for j in 0..d {
                    p[j] = a_inv[(j, i)];
                }
                let gp = &g_inv[i] * &p;
                let qa = p.dot(&gp);
                let qb = acc.k[i].dot(&gp);
                let disc = (qb * qb + 4.0 * qa * acc.beta).sqrt();
                let mut best: Option<(f64, DVector<f64>)> = None;
                for alpha in [(-qb + disc) / (2.0 * qa), (-qb - disc) / (2.0 * qa)] {
                    let cand = &g_inv[i] * (&p * alpha + &acc.k[i]);
                    let pw = p.dot(&cand);
                    let val = acc.beta * pw.abs().ln() + cand.dot(&acc.k[i])
                        - 0.5 * (cand.transpose() * &acc.g[i] * &cand)[(0, 0)];
                    if val.is_finite() && best.as_ref().is_none_or(|(v, _)| val > *v) {
                        best = Some((val, cand));
                    }
                }
                let (_, row) = best.ok_or_else(|| Error::Numerical("fMLLR row update failed".into()))?;
                w.set_row(i, &row.transpose());
                let q = aux(&acc, &w);
                if !q.is_finite() {
                    return Err(Error::Numerical("fMLLR auxiliary became non-finite".into()));
                }
                trace.push(q);
            }
        }
        stats.aux_trace.push(trace);
        let a = w.columns(0, d).into_owned();
        let b = w.column(d).into_owned();
        current = FmllrTransform::from_parts(speaker, &a, &b)?;
    }
    Ok((current, stats))
}
