//! Random-forest regression on encoded vectors.
//!
//! Numeric dims split on midpoint thresholds (the `-1` inactive sentinel is
//! just another value); categorical dims split on equality with one category
//! index. Each leaf keeps the mean and variance of its targets so the forest
//! can report a predictive variance.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::PosteriorPrediction;
use crate::space::ConfigSpace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestSettings {
    pub trees: usize,
    /// Resample the training set per tree.
    pub bootstrap: bool,
    /// Bootstrap sample size as a fraction of the training set.
    pub bootstrap_fraction: f64,
    /// Features considered per split; `None` means `ceil(d * 5 / 6)`.
    pub split_features: Option<usize>,
    pub min_samples_split: usize,
    pub max_depth: usize,
}

impl Default for ForestSettings {
    fn default() -> Self {
        Self {
            trees: 64,
            bootstrap: true,
            bootstrap_fraction: 1.0,
            split_features: None,
            min_samples_split: 3,
            max_depth: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Test {
    LessEq(f64),
    Equals(f64),
}

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        mean: f64,
        variance: f64,
    },
    Split {
        dim: usize,
        test: Test,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn leaf(&self, x: &[f64]) -> (f64, f64) {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { mean, variance } => return (mean, variance),
                Node::Split {
                    dim,
                    test,
                    left,
                    right,
                } => {
                    let goes_left = match test {
                        Test::LessEq(t) => x[dim] <= t,
                        Test::Equals(c) => x[dim] == c,
                    };
                    at = if goes_left { left } else { right };
                }
            }
        }
    }
}

struct Builder<'a, R: ?Sized> {
    xs: &'a [Vec<f64>],
    ys: &'a [f64],
    categorical: Vec<bool>,
    split_features: usize,
    settings: &'a ForestSettings,
    rng: &'a mut R,
    nodes: Vec<Node>,
}

fn mean_var(ys: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| ys[i]).sum::<f64>() / n;
    let var = idx.iter().map(|&i| (ys[i] - mean).powi(2)).sum::<f64>() / n;
    (mean, var)
}

impl<R: Rng + ?Sized> Builder<'_, R> {
    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let (mean, variance) = mean_var(self.ys, &idx);
        let slot = self.nodes.len();
        self.nodes.push(Node::Leaf { mean, variance });
        if idx.len() < self.settings.min_samples_split
            || depth >= self.settings.max_depth
            || variance <= 0.0
        {
            return slot;
        }
        let dims = self.categorical.len();
        let candidates = sample(self.rng, dims, self.split_features.min(dims)).into_vec();
        let mut best: Option<(f64, usize, Test)> = None;
        for dim in candidates {
            if let Some((gain, test)) = self.best_split(&idx, dim) {
                if best.as_ref().is_none_or(|(g, _, _)| gain > *g) {
                    best = Some((gain, dim, test));
                }
            }
        }
        let Some((_, dim, test)) = best else {
            return slot;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| match test {
            Test::LessEq(t) => self.xs[i][dim] <= t,
            Test::Equals(c) => self.xs[i][dim] == c,
        });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[slot] = Node::Split {
            dim,
            test,
            left,
            right,
        };
        slot
    }

    /// Best split of `idx` on `dim` by squared-error reduction.
    fn best_split(&self, idx: &[usize], dim: usize) -> Option<(f64, Test)> {
        let n = idx.len() as f64;
        let total: f64 = idx.iter().map(|&i| self.ys[i]).sum();
        let total_sq: f64 = idx.iter().map(|&i| self.ys[i] * self.ys[i]).sum();
        let parent_sse = total_sq - total * total / n;
        let sse = |s: f64, s2: f64, c: f64| s2 - s * s / c;
        let mut best: Option<(f64, Test)> = None;
        if self.categorical[dim] {
            let mut cats: Vec<f64> = idx.iter().map(|&i| self.xs[i][dim]).collect();
            cats.sort_by(f64::total_cmp);
            cats.dedup();
            if cats.len() < 2 {
                return None;
            }
            for c in cats {
                let (mut s, mut s2, mut k) = (0.0, 0.0, 0.0);
                for &i in idx {
                    if self.xs[i][dim] == c {
                        s += self.ys[i];
                        s2 += self.ys[i] * self.ys[i];
                        k += 1.0;
                    }
                }
                let gain = parent_sse - sse(s, s2, k) - sse(total - s, total_sq - s2, n - k);
                if gain > 1e-12 && best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, Test::Equals(c)));
                }
            }
        } else {
            let mut order: Vec<usize> = idx.to_vec();
            order.sort_by(|&a, &b| self.xs[a][dim].total_cmp(&self.xs[b][dim]));
            let (mut s, mut s2) = (0.0, 0.0);
            for (k, w) in order.windows(2).enumerate() {
                let y = self.ys[w[0]];
                s += y;
                s2 += y * y;
                let (a, b) = (self.xs[w[0]][dim], self.xs[w[1]][dim]);
                if a == b {
                    continue;
                }
                let c = (k + 1) as f64;
                let gain = parent_sse - sse(s, s2, c) - sse(total - s, total_sq - s2, n - c);
                if gain > 1e-12 && best.is_none_or(|(g, _)| gain > g) {
                    best = Some((gain, Test::LessEq(0.5 * (a + b))));
                }
            }
        }
        best
    }
}

/// A fitted random forest.
#[derive(Debug, Clone)]
pub struct ForestSurrogate {
    trees: Vec<Tree>,
}

impl ForestSurrogate {
    pub fn fit<R: Rng + ?Sized>(
        xs: &[Vec<f64>],
        ys: &[f64],
        space: &ConfigSpace,
        settings: &ForestSettings,
        rng: &mut R,
    ) -> Self {
        let dims = space.dim();
        let categorical: Vec<bool> = space.params().iter().map(|p| !p.is_numeric()).collect();
        let split_features = settings
            .split_features
            .unwrap_or_else(|| (dims * 5).div_ceil(6))
            .clamp(1, dims);
        let n = xs.len();
        let sample_size = ((settings.bootstrap_fraction * n as f64).round() as usize).clamp(1, n);
        let trees = (0..settings.trees.max(1))
            .map(|_| {
                let idx: Vec<usize> = if settings.bootstrap {
                    (0..sample_size).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut builder = Builder {
                    xs,
                    ys,
                    categorical: categorical.clone(),
                    split_features,
                    settings,
                    rng: &mut *rng,
                    nodes: Vec::new(),
                };
                builder.build(idx, 0);
                Tree {
                    nodes: builder.nodes,
                }
            })
            .collect();
        Self { trees }
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Per-tree leaf means at `x`.
    pub fn tree_means(&self, x: &[f64]) -> Vec<f64> {
        self.trees.iter().map(|t| t.leaf(x).0).collect()
    }

    pub fn predict(&self, x: &[f64]) -> PosteriorPrediction {
        let t = self.trees.len() as f64;
        let leaves: Vec<(f64, f64)> = self.trees.iter().map(|tree| tree.leaf(x)).collect();
        let mean = leaves.iter().map(|l| l.0).sum::<f64>() / t;
        let across = leaves.iter().map(|l| (l.0 - mean).powi(2)).sum::<f64>() / t;
        let within = leaves.iter().map(|l| l.1).sum::<f64>() / t;
        PosteriorPrediction {
            mean,
            variance: across + within,
        }
    }
}
