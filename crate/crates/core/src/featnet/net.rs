use nalgebra::{DMatrix, DMatrixView};
use rayon::prelude::*;

use super::{FeatNetConfig, FeatNetParams};
use crate::error::{Error, Result};

/// Batch-norm statistics source.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BnMode {
    /// Normalize with the batch's own moments (training).
    Batch,
    /// Normalize with the stored running moments (inference).
    Running,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forward {
    pub logits: Vec<f64>,
    pub bottleneck: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

struct ConvCache {
    cols: Vec<DMatrix<f64>>,
    /// Post-ReLU conv outputs, channel-major.
    acts: Vec<Vec<f64>>,
    /// For each pooled output, the index of the winning activation.
    argmax: Vec<Vec<usize>>,
}

/// Patch matrix of a valid convolution: row p is the receptive field of
/// output position p, column q indexes (channel, ky, kx).
fn im2col(input: &[f64], [c, h, w]: [usize; 3], k: usize) -> DMatrix<f64> {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let p = ho * wo;
    let mut m = DMatrix::zeros(p, c * k * k);
    let data = m.as_mut_slice();
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let q = (ci * k + ky) * k + kx;
                let col = &mut data[q * p..(q + 1) * p];
                for y in 0..ho {
                    let src = ci * h * w + (y + ky) * w + kx;
                    col[y * wo..(y + 1) * wo].copy_from_slice(&input[src..src + wo]);
                }
            }
        }
    }
    m
}

fn col2im(cols: &DMatrix<f64>, [c, h, w]: [usize; 3], k: usize) -> Vec<f64> {
    let (ho, wo) = (h - k + 1, w - k + 1);
    let p = ho * wo;
    let data = cols.as_slice();
    let mut out = vec![0.0; c * h * w];
    for ci in 0..c {
        for ky in 0..k {
            for kx in 0..k {
                let q = (ci * k + ky) * k + kx;
                let col = &data[q * p..(q + 1) * p];
                for y in 0..ho {
                    let dst = ci * h * w + (y + ky) * w + kx;
                    for (o, v) in out[dst..dst + wo].iter_mut().zip(&col[y * wo..(y + 1) * wo]) {
                        *o += v;
                    }
                }
            }
        }
    }
    out
}

fn conv_forward(params: &FeatNetParams, cfg: &FeatNetConfig, shapes: &[[usize; 3]], input: &[f64]) -> (Vec<f64>, ConvCache) {
    let k = cfg.conv_kernel;
    let pool = cfg.pool;
    let mut cache = ConvCache { cols: vec![], acts: vec![], argmax: vec![] };
    let mut x = input.to_vec();
    for (l, layer) in params.conv.iter().enumerate() {
        let [c, h, w] = shapes[l];
        let (ho, wo) = (h - k + 1, w - k + 1);
        let p = ho * wo;
        let cols = im2col(&x, shapes[l], k);
        let wt = DMatrixView::from_slice(&layer.w, c * k * k, layer.out_c);
        let out = &cols * wt;
        let mut act = out.as_slice().to_vec();
        for f in 0..layer.out_c {
            for v in &mut act[f * p..(f + 1) * p] {
                *v = (*v + layer.b[f]).max(0.0);
            }
        }
        let (ph, pw) = (ho / pool, wo / pool);
        let mut pooled = vec![0.0; layer.out_c * ph * pw];
        let mut arg = vec![0usize; pooled.len()];
        for f in 0..layer.out_c {
            for py in 0..ph {
                for px in 0..pw {
                    let mut best = f64::NEG_INFINITY;
                    let mut bi = 0;
                    for dy in 0..pool {
                        for dx in 0..pool {
                            let i = f * p + (py * pool + dy) * wo + px * pool + dx;
                            if act[i] > best {
                                best = act[i];
                                bi = i;
                            }
                        }
                    }
                    let o = (f * ph + py) * pw + px;
                    pooled[o] = best;
                    arg[o] = bi;
                }
            }
        }
        cache.cols.push(cols);
        cache.acts.push(act);
        cache.argmax.push(arg);
        x = pooled;
    }
    (x, cache)
}

/// Returns (dw, db) per conv layer given the gradient of the flattened
/// pooled output.
fn conv_backward(
    params: &FeatNetParams,
    cfg: &FeatNetConfig,
    shapes: &[[usize; 3]],
    cache: &ConvCache,
    dflat: &[f64],
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let k = cfg.conv_kernel;
    let mut grads = vec![(vec![], vec![]); params.conv.len()];
    let mut dx = dflat.to_vec();
    for l in (0..params.conv.len()).rev() {
        let layer = &params.conv[l];
        let [c, h, w] = shapes[l];
        let p = (h - k + 1) * (w - k + 1);
        let mut dact = vec![0.0; layer.out_c * p];
        for (o, &i) in cache.argmax[l].iter().enumerate() {
            dact[i] += dx[o];
        }
        for (d, a) in dact.iter_mut().zip(&cache.acts[l]) {
            if *a <= 0.0 {
                *d = 0.0;
            }
        }
        let dout = DMatrix::from_vec(p, layer.out_c, dact);
        let dw = cache.cols[l].tr_mul(&dout);
        let db: Vec<f64> = (0..layer.out_c).map(|f| dout.column(f).sum()).collect();
        if l > 0 {
            let wt = DMatrixView::from_slice(&layer.w, c * k * k, layer.out_c);
            let dcols = &dout * wt.transpose();
            dx = col2im(&dcols, shapes[l], k);
        }
        grads[l] = (dw.as_slice().to_vec(), db);
    }
    grads
}

struct HeadCache {
    xhat: DMatrix<f64>,
    inv_std: Vec<f64>,
    /// Input of every dense layer; `inputs[0]` is the batch-norm output.
    inputs: Vec<DMatrix<f64>>,
    /// Pre-activation output of every dense layer (the last is the logits).
    pre: Vec<DMatrix<f64>>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

fn head_forward(params: &FeatNetParams, cfg: &FeatNetConfig, flat: &DMatrix<f64>, mode: BnMode) -> HeadCache {
    let (b, n) = flat.shape();
    let bn = &params.bn;
    let (mean, var): (Vec<f64>, Vec<f64>) = match mode {
        BnMode::Batch => (0..n)
            .map(|j| {
                let col = flat.column(j);
                let m = col.sum() / b as f64;
                let v = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / b as f64;
                (m, v)
            })
            .unzip(),
        BnMode::Running => (bn.running_mean.clone(), bn.running_var.clone()),
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + cfg.bn_eps).sqrt()).collect();
    let mut xhat = flat.clone();
    let mut y = flat.clone();
    for j in 0..n {
        for i in 0..b {
            let xh = (flat[(i, j)] - mean[j]) * inv_std[j];
            xhat[(i, j)] = xh;
            y[(i, j)] = bn.gamma[j] * xh + bn.beta[j];
        }
    }
    let mut inputs = vec![y];
    let mut pre = vec![];
    let last = params.fc.len() - 1;
    for (l, d) in params.fc.iter().enumerate() {
        let wt = DMatrixView::from_slice(&d.w, d.inp, d.out);
        let mut z = &inputs[l] * wt;
        for j in 0..d.out {
            z.column_mut(j).add_scalar_mut(d.b[j]);
        }
        if l < last {
            inputs.push(z.map(|v| v.max(0.0)));
        }
        pre.push(z);
    }
    HeadCache { xhat, inv_std, inputs, pre, batch_mean: mean, batch_var: var }
}

struct HeadGrads {
    dflat: DMatrix<f64>,
    dgamma: Vec<f64>,
    dbeta: Vec<f64>,
    dense: Vec<(Vec<f64>, Vec<f64>)>,
}

fn head_backward(params: &FeatNetParams, cache: &HeadCache, dlogits: DMatrix<f64>) -> HeadGrads {
    let mut dz = dlogits;
    let mut dense = vec![(vec![], vec![]); params.fc.len()];
    let mut dy = None;
    for l in (0..params.fc.len()).rev() {
        let d = &params.fc[l];
        let dw = cache.inputs[l].tr_mul(&dz);
        let db: Vec<f64> = (0..d.out).map(|j| dz.column(j).sum()).collect();
        dense[l] = (dw.as_slice().to_vec(), db);
        let wt = DMatrixView::from_slice(&d.w, d.inp, d.out);
        let mut da = &dz * wt.transpose();
        if l > 0 {
            da.zip_apply(&cache.pre[l - 1], |g, z| {
                if z <= 0.0 {
                    *g = 0.0;
                }
            });
            dz = da;
        } else {
            dy = Some(da);
        }
    }
    let dy = dy.expect("at least one dense layer");
    let (b, n) = dy.shape();
    let bn = &params.bn;
    let mut dgamma = vec![0.0; n];
    let mut dbeta = vec![0.0; n];
    let mut dflat = DMatrix::zeros(b, n);
    for j in 0..n {
        let mut s_dxh = 0.0;
        let mut s_dxh_xh = 0.0;
        for i in 0..b {
            let g = dy[(i, j)];
            dgamma[j] += g * cache.xhat[(i, j)];
            dbeta[j] += g;
            let dxh = g * bn.gamma[j];
            s_dxh += dxh;
            s_dxh_xh += dxh * cache.xhat[(i, j)];
        }
        let bf = b as f64;
        for i in 0..b {
            let dxh = dy[(i, j)] * bn.gamma[j];
            dflat[(i, j)] = cache.inv_std[j] / bf * (bf * dxh - s_dxh - cache.xhat[(i, j)] * s_dxh_xh);
        }
    }
    HeadGrads { dflat, dgamma, dbeta, dense }
}

fn check_inputs(cfg: &FeatNetConfig, inputs: &[&[f64]]) -> Result<()> {
    let n = cfg.input_len();
    if let Some(bad) = inputs.iter().find(|x| x.len() != n) {
        return Err(Error::Shape(format!("input of length {} for shape {:?}", bad.len(), cfg.input_shape)));
    }
    Ok(())
}

fn flatten_batch(params: &FeatNetParams, cfg: &FeatNetConfig, shapes: &[[usize; 3]], inputs: &[&[f64]]) -> (DMatrix<f64>, Vec<ConvCache>) {
    let outs: Vec<(Vec<f64>, ConvCache)> = inputs.par_iter().map(|x| conv_forward(params, cfg, shapes, x)).collect();
    let n = outs.first().map_or(0, |o| o.0.len());
    let mut flat = DMatrix::zeros(inputs.len(), n);
    let mut caches = Vec::with_capacity(outs.len());
    for (i, (v, c)) in outs.into_iter().enumerate() {
        for (j, x) in v.into_iter().enumerate() {
            flat[(i, j)] = x;
        }
        caches.push(c);
    }
    (flat, caches)
}

fn outputs(cfg: &FeatNetConfig, cache: &HeadCache) -> Vec<Forward> {
    let logits = cache.pre.last().unwrap();
    let bott = &cache.inputs[cfg.bottleneck_layer + 1];
    (0..logits.nrows())
        .map(|i| Forward {
            logits: logits.row(i).iter().copied().collect(),
            bottleneck: bott.row(i).iter().copied().collect(),
        })
        .collect()
}

/// Inference-mode forward pass of one input.
pub fn forward(params: &FeatNetParams, cfg: &FeatNetConfig, input: &[f64]) -> Result<Forward> {
    Ok(infer_batch(params, cfg, &[input])?.remove(0))
}

/// Inference-mode forward pass of a batch; each output depends only on its
/// own input.
pub(crate) fn infer_batch(params: &FeatNetParams, cfg: &FeatNetConfig, inputs: &[&[f64]]) -> Result<Vec<Forward>> {
    check_inputs(cfg, inputs)?;
    if inputs.is_empty() {
        return Ok(vec![]);
    }
    let shapes = cfg.conv_shapes()?;
    let (flat, _) = flatten_batch(params, cfg, &shapes, inputs);
    Ok(outputs(cfg, &head_forward(params, cfg, &flat, BnMode::Running)))
}

/// Forward pass of a batch. In training mode the batch moments normalize the
/// flattened conv output and the running moments are updated.
pub fn forward_batch(
    params: &mut FeatNetParams,
    cfg: &FeatNetConfig,
    inputs: &[&[f64]],
    train_mode: bool,
) -> Result<Vec<Forward>> {
    if !train_mode {
        return infer_batch(params, cfg, inputs);
    }
    check_inputs(cfg, inputs)?;
    if inputs.is_empty() {
        return Ok(vec![]);
    }
    let shapes = cfg.conv_shapes()?;
    let (flat, _) = flatten_batch(params, cfg, &shapes, inputs);
    let cache = head_forward(params, cfg, &flat, BnMode::Batch);
    update_running(params, cfg, &cache.batch_mean, &cache.batch_var, inputs.len());
    Ok(outputs(cfg, &cache))
}

/// ReLU signs and max-pool winners of a training-mode pass; the loss is
/// smooth between two parameter points that share this pattern.
pub(crate) fn activation_pattern(params: &FeatNetParams, cfg: &FeatNetConfig, inputs: &[&[f64]]) -> Result<Vec<u64>> {
    check_inputs(cfg, inputs)?;
    let shapes = cfg.conv_shapes()?;
    let (flat, caches) = flatten_batch(params, cfg, &shapes, inputs);
    let mut out = vec![];
    for c in &caches {
        for (acts, arg) in c.acts.iter().zip(&c.argmax) {
            out.extend(acts.iter().map(|&a| u64::from(a > 0.0)));
            out.extend(arg.iter().map(|&i| i as u64));
        }
    }
    let head = head_forward(params, cfg, &flat, BnMode::Batch);
    for z in &head.pre[..head.pre.len() - 1] {
        out.extend(z.iter().map(|&v| u64::from(v > 0.0)));
    }
    Ok(out)
}

pub(crate) fn update_running(params: &mut FeatNetParams, cfg: &FeatNetConfig, mean: &[f64], var: &[f64], b: usize) {
    let m = cfg.bn_momentum;
    let unbias = if b > 1 { b as f64 / (b - 1) as f64 } else { 1.0 };
    for j in 0..mean.len() {
        params.bn.running_mean[j] = (1.0 - m) * params.bn.running_mean[j] + m * mean[j];
        params.bn.running_var[j] = (1.0 - m) * params.bn.running_var[j] + m * var[j] * unbias;
    }
}

/// Training-mode batch loss (mean cross-entropy plus `l2_weight · ½‖W‖²`)
/// and its gradient, without touching the running moments. Also returns
/// the batch moments so the caller can update them.
pub fn loss_and_gradient(
    params: &FeatNetParams,
    cfg: &FeatNetConfig,
    inputs: &[&[f64]],
    labels: &[usize],
) -> Result<(f64, FeatNetParams, (Vec<f64>, Vec<f64>))> {
    check_inputs(cfg, inputs)?;
    if inputs.is_empty() || inputs.len() != labels.len() {
        return Err(Error::Shape("batch inputs and labels differ in count or are empty".into()));
    }
    if let Some(l) = labels.iter().find(|&&l| l >= cfg.n_classes) {
        return Err(Error::invalid(format!("label {l} outside {} classes", cfg.n_classes)));
    }
    let shapes = cfg.conv_shapes()?;
    let (flat, caches) = flatten_batch(params, cfg, &shapes, inputs);
    let head = head_forward(params, cfg, &flat, BnMode::Batch);
    let logits = head.pre.last().unwrap();
    let b = inputs.len() as f64;
    let mut ce = 0.0;
    let mut dlogits = DMatrix::zeros(logits.nrows(), logits.ncols());
    for i in 0..logits.nrows() {
        let row: Vec<f64> = logits.row(i).iter().copied().collect();
        let p = softmax(&row);
        ce -= p[labels[i]].max(f64::MIN_POSITIVE).ln();
        for (j, pj) in p.iter().enumerate() {
            dlogits[(i, j)] = (pj - if j == labels[i] { 1.0 } else { 0.0 }) / b;
        }
    }
    let loss = ce / b + cfg.l2_weight * params.half_sq_weights();
    let hg = head_backward(params, &head, dlogits);
    let conv_grads: Vec<Vec<(Vec<f64>, Vec<f64>)>> = caches
        .par_iter()
        .enumerate()
        .map(|(i, c)| {
            let d: Vec<f64> = hg.dflat.row(i).iter().copied().collect();
            conv_backward(params, cfg, &shapes, c, &d)
        })
        .collect();
    let mut grads = params.clone();
    for (l, g) in grads.conv.iter_mut().enumerate() {
        g.w.iter_mut().for_each(|v| *v = 0.0);
        g.b.iter_mut().for_each(|v| *v = 0.0);
        for sample in &conv_grads {
            for (a, v) in g.w.iter_mut().zip(&sample[l].0) {
                *a += v;
            }
            for (a, v) in g.b.iter_mut().zip(&sample[l].1) {
                *a += v;
            }
        }
    }
    grads.bn.gamma = hg.dgamma;
    grads.bn.beta = hg.dbeta;
    grads.bn.running_mean.iter_mut().for_each(|v| *v = 0.0);
    grads.bn.running_var.iter_mut().for_each(|v| *v = 0.0);
    for (g, (dw, db)) in grads.fc.iter_mut().zip(hg.dense) {
        g.w = dw;
        g.b = db;
    }
    if cfg.l2_weight > 0.0 {
        let lam = cfg.l2_weight;
        for (g, p) in grads.conv.iter_mut().zip(&params.conv) {
            g.w.iter_mut().zip(&p.w).for_each(|(a, w)| *a += lam * w);
        }
        for (g, p) in grads.fc.iter_mut().zip(&params.fc) {
            g.w.iter_mut().zip(&p.w).for_each(|(a, w)| *a += lam * w);
        }
    }
    Ok((loss, grads, (head.batch_mean, head.batch_var)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::featnet::init_params;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn running_batch_norm_is_affine(
            xs in prop::collection::vec(-5.0f64..5.0, 32),
            ys in prop::collection::vec(-5.0f64..5.0, 32),
            a in -2.0f64..2.0,
            seed in 0u64..1000,
        ) {
            let cfg = FeatNetConfig { input_shape: [1, 8, 8], conv_kernel: 3, conv_filters: vec![8], fc_dims: vec![3, 3, 3, 3], n_classes: 2, ..FeatNetConfig::full() };
            let mut p = init_params(&cfg, seed).unwrap();
            let n = p.bn.gamma.len();
            prop_assert_eq!(n, 72);
            for j in 0..n {
                p.bn.gamma[j] = 0.5 + (j % 5) as f64 * 0.3;
                p.bn.beta[j] = (j % 3) as f64 - 1.0;
                p.bn.running_mean[j] = (j % 7) as f64 * 0.1;
                p.bn.running_var[j] = 0.2 + (j % 4) as f64;
            }
            let row = |v: &[f64]| DMatrix::from_fn(1, n, |_, j| v[j % v.len()]);
            let bn = |m: DMatrix<f64>| head_forward(&p, &cfg, &m, BnMode::Running).inputs[0].clone();
            let mix: Vec<f64> = (0..n).map(|j| a * xs[j % 32] + (1.0 - a) * ys[j % 32]).collect();
            let lhs = bn(row(&mix));
            let rhs = bn(row(&xs)) * a + bn(row(&ys)) * (1.0 - a);
            for (l, r) in lhs.iter().zip(rhs.iter()) {
                prop_assert!((l - r).abs() < 1e-9);
            }
        }
    }
}
