//! Isolation forest over fixed-dimension points.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` points: c(n) = 2H(n−1) − 2(n−1)/n with H(i) ≈ ln i + γ.
pub fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub sample_size: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            sample_size: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Internal {
        dim: usize,
        split: f64,
        left: u32,
        right: u32,
        size: usize,
    },
    Leaf {
        size: usize,
    },
}

/// One random partition tree; node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<Node>,
}

impl IsolationTree {
    fn build<const D: usize, R: Rng>(points: &[[f64; D]], mut idx: Vec<usize>, limit: usize, rng: &mut R) -> Self {
        let mut tree = IsolationTree { nodes: vec![] };
        tree.grow(points, &mut idx, 0, limit, rng);
        tree
    }

    fn grow<const D: usize, R: Rng>(
        &mut self,
        points: &[[f64; D]],
        idx: &mut [usize],
        depth: usize,
        limit: usize,
        rng: &mut R,
    ) -> u32 {
        let id = self.nodes.len() as u32;
        let size = idx.len();
        self.nodes.push(Node::Leaf { size });
        if depth >= limit || size <= 1 {
            return id;
        }
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); D];
        for &i in idx.iter() {
            for (d, r) in ranges.iter_mut().enumerate() {
                r.0 = r.0.min(points[i][d]);
                r.1 = r.1.max(points[i][d]);
            }
        }
        let splittable: Vec<usize> = (0..D).filter(|&d| ranges[d].1 > ranges[d].0).collect();
        if splittable.is_empty() {
            return id;
        }
        let dim = splittable[rng.random_range(0..splittable.len())];
        let (lo, hi) = ranges[dim];
        let split = loop {
            let s = lo + rng.random::<f64>() * (hi - lo);
            if s > lo && s <= hi {
                break s;
            }
        };
        // Partition in place: values below the split go left.
        let mut mid = 0;
        for k in 0..idx.len() {
            if points[idx[k]][dim] < split {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let (l, r) = idx.split_at_mut(mid);
        let left = self.grow(points, l, depth + 1, limit, rng);
        let right = self.grow(points, r, depth + 1, limit, rng);
        self.nodes[id as usize] = Node::Internal {
            dim,
            split,
            left,
            right,
            size,
        };
        id
    }

    /// Path length of `x`, extended by c(size) at the terminal leaf.
    pub fn path_length<const D: usize>(&self, x: &[f64; D]) -> f64 {
        let mut node = 0usize;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Internal { dim, split, left, right, .. } => {
                    node = if x[dim] < split { left as usize } else { right as usize };
                    depth += 1.0;
                }
                Node::Leaf { size } => return depth + average_path_length(size),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    /// Effective subsample size ψ (capped by the number of training points).
    pub sample_size: usize,
    pub height_limit: usize,
}

/// Builds `n_trees` trees, each on a ψ-subsample drawn without replacement,
/// grown to depth ⌈log₂ ψ⌉. Tree `t` draws from its own seed stream.
pub fn fit_iforest<const D: usize>(points: &[[f64; D]], params: ForestParams, seed: u64) -> Result<IsolationForest> {
    if points.len() < 2 {
        return Err(Error::invalid("isolation forest needs at least 2 points"));
    }
    if params.n_trees == 0 || params.sample_size < 2 {
        return Err(Error::invalid("isolation forest needs n_trees >= 1 and sample size >= 2"));
    }
    let psi = params.sample_size.min(points.len());
    let height_limit = (psi as f64).log2().ceil() as usize;
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = rng::seeded(seed, &[t as u64]);
            let idx = index::sample(&mut rng, points.len(), psi).into_vec();
            IsolationTree::build(points, idx, height_limit, &mut rng)
        })
        .collect();
    Ok(IsolationForest {
        trees,
        sample_size: psi,
        height_limit,
    })
}

impl IsolationForest {
    /// s(x) = 2^(−E[h(x)] / c(ψ)); values near 1 are anomalous.
    pub fn anomaly_score<const D: usize>(&self, x: &[f64; D]) -> f64 {
        let mean = self.trees.iter().map(|t| t.path_length(x)).sum::<f64>() / self.trees.len() as f64;
        Self::score_from_mean_path(mean, self.sample_size)
    }

    pub fn score_from_mean_path(mean_path: f64, sample_size: usize) -> f64 {
        2f64.powf(-mean_path / average_path_length(sample_size))
    }

    pub fn scores<const D: usize>(&self, points: &[[f64; D]]) -> Vec<f64> {
        points.iter().map(|p| self.anomaly_score(p)).collect()
    }
}
