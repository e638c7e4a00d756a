use serde::{Deserialize, Serialize};

use crate::corpus::NormStats;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatNetConfig {
    /// Channels × height × width.
    pub input_shape: [usize; 3],
    pub conv_kernel: usize,
    pub conv_filters: Vec<usize>,
    pub pool: usize,
    pub fc_dims: Vec<usize>,
    pub n_classes: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub l2_weight: f64,
    pub seed: u64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
    /// Index into `fc_dims` of the exported layer.
    pub bottleneck_layer: usize,
    /// Pixel normalization fitted on the training split.
    pub normalization: Option<NormStats>,
}

impl Default for FeatNetConfig {
    fn default() -> Self {
        Self::full()
    }
}

impl FeatNetConfig {
    pub fn full() -> Self {
        Self {
            input_shape: [7, 64, 128],
            conv_kernel: 10,
            conv_filters: vec![64, 128],
            pool: 2,
            fc_dims: vec![1024, 512, 128, 512],
            n_classes: 49,
            lr: 0.001,
            epochs: 30,
            batch_size: 256,
            l2_weight: 0.1,
            seed: 0,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
            bottleneck_layer: 2,
            normalization: None,
        }
    }

    /// Reduced network for 16×32 frames; 10×10 valid kernels do not fit
    /// two conv/pool stages at that size.
    pub fn desk() -> Self {
        Self {
            input_shape: [7, 16, 32],
            conv_kernel: 5,
            conv_filters: vec![4, 8],
            fc_dims: vec![128, 64, 32, 64],
            n_classes: 8,
            lr: 0.02,
            epochs: 6,
            batch_size: 64,
            l2_weight: 1e-4,
            ..Self::full()
        }
    }

    pub fn bottleneck_dim(&self) -> usize {
        self.fc_dims[self.bottleneck_layer]
    }

    pub fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Shapes (c, h, w) entering each conv layer, followed by the pooled
    /// output of the last one.
    pub fn conv_shapes(&self) -> Result<Vec<[usize; 3]>> {
        let [mut c, mut h, mut w] = self.input_shape;
        let mut out = vec![[c, h, w]];
        for &f in &self.conv_filters {
            let k = self.conv_kernel;
            if h < k || w < k {
                return Err(Error::Shape(format!("{k}×{k} kernel does not fit a {h}×{w} input")));
            }
            let (ch, cw) = (h - k + 1, w - k + 1);
            if ch < self.pool || cw < self.pool {
                return Err(Error::Shape(format!("{ch}×{cw} conv output smaller than the pool")));
            }
            c = f;
            h = ch / self.pool;
            w = cw / self.pool;
            out.push([c, h, w]);
        }
        Ok(out)
    }

    pub fn flat_dim(&self) -> Result<usize> {
        Ok(self.conv_shapes()?.last().unwrap().iter().product())
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_shape.contains(&0) || self.conv_kernel == 0 || self.pool == 0 {
            return Err(Error::invalid("input shape, kernel and pool must be positive"));
        }
        if self.conv_filters.is_empty() || self.conv_filters.contains(&0) {
            return Err(Error::invalid("conv filter counts must be positive"));
        }
        if self.fc_dims.contains(&0) || self.bottleneck_layer >= self.fc_dims.len() {
            return Err(Error::invalid("bottleneck layer must index a nonzero fc layer"));
        }
        if self.n_classes < 2 {
            return Err(Error::invalid("need at least two classes"));
        }
        if !(self.lr >= 0.0) || !(self.l2_weight >= 0.0) || self.batch_size == 0 {
            return Err(Error::invalid("lr and l2_weight must be non-negative, batch size positive"));
        }
        if !(self.bn_eps > 0.0) || !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::invalid("batch-norm eps must be positive and momentum in [0, 1]"));
        }
        self.conv_shapes().map(|_| ())
    }
}
