//! Random forest of CART trees; each tree is one posterior draw.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{PointwiseSampler, PosteriorSampler, StochasticClassifier};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::prob::PredSampleTensor;
use crate::seed::{derive, rng_from};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub trees: usize,
    /// Features tried per split; `None` means `ceil(sqrt(D))`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
    /// Laplace pseudo-count added to every class in each leaf.
    pub pseudo_count: f64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            trees: 100,
            max_features: None,
            bootstrap: true,
            pseudo_count: 1e-3,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.trees == 0 {
            problems.push("forest needs at least one tree".into());
        }
        if self.max_features == Some(0) {
            problems.push("forest max_features must be at least 1".into());
        }
        if !(self.pseudo_count >= 0.0 && self.pseudo_count.is_finite()) {
            problems.push(format!("forest pseudo_count must be non-negative, got {}", self.pseudo_count));
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(Vec<f64>),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict(&self, x: &[f64]) -> &[f64] {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }
}

struct Builder<'a> {
    data: &'a LabeledSet,
    max_features: usize,
    pseudo_count: f64,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

fn gini(counts: &[f64], total: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

impl Builder<'_> {
    fn leaf(&self, counts: &[f64], total: f64) -> Node {
        let denom = total + self.pseudo_count * counts.len() as f64;
        Node::Leaf(counts.iter().map(|c| (c + self.pseudo_count) / denom).collect())
    }

    fn counts(&self, idx: &[usize]) -> Vec<f64> {
        let mut counts = vec![0.0; self.data.num_classes];
        for &i in idx {
            counts[self.data.labels[i]] += 1.0;
        }
        counts
    }

    /// Best Gini split of `idx` over a random subset of the features. Constant
    /// features do not count towards the subset, as in common CART
    /// implementations; a zero-gain split is accepted.
    fn best_split(&mut self, idx: &[usize], parent: &[f64]) -> Option<(usize, f64)> {
        let dim = self.data.dim();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(&mut self.rng);
        let total = idx.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        let mut tried = 0;
        let mut order = idx.to_vec();
        for f in features {
            if tried == self.max_features {
                break;
            }
            order.sort_by(|&a, &b| self.data.inputs[a][f].total_cmp(&self.data.inputs[b][f]));
            let first = self.data.inputs[order[0]][f];
            let last = self.data.inputs[order[order.len() - 1]][f];
            if first == last {
                continue;
            }
            tried += 1;
            let mut left = vec![0.0; parent.len()];
            for split in 1..order.len() {
                left[self.data.labels[order[split - 1]]] += 1.0;
                let lo = self.data.inputs[order[split - 1]][f];
                let hi = self.data.inputs[order[split]][f];
                if lo == hi {
                    continue;
                }
                let nl = split as f64;
                let nr = total - nl;
                let right: Vec<f64> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
                let impurity = (nl * gini(&left, nl) + nr * gini(&right, nr)) / total;
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((impurity, f, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, idx: Vec<usize>) -> usize {
        let counts = self.counts(&idx);
        let total = idx.len() as f64;
        let at = self.nodes.len();
        let pure = counts.iter().filter(|&&c| c > 0.0).count() <= 1;
        let split = if pure || idx.len() < 2 {
            None
        } else {
            self.best_split(&idx, &counts)
        };
        let Some((feature, threshold)) = split else {
            let leaf = self.leaf(&counts, total);
            self.nodes.push(leaf);
            return at;
        };
        self.nodes.push(Node::Leaf(Vec::new()));
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| self.data.inputs[i][feature] <= threshold);
        let left = self.grow(l);
        let right = self.grow(r);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForestClassifier {
    trees: Vec<DecisionTree>,
    num_classes: usize,
}

impl RandomForestClassifier {
    /// Grows `cfg.trees` unpruned trees, tree `t` seeded by `derive(seed, t)`.
    pub fn fit(train: &LabeledSet, cfg: &ForestConfig, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("forest training set"));
        }
        if cfg.trees == 0 {
            return Err(Error::InvalidArgument("forest needs at least one tree".into()));
        }
        let dim = train.dim();
        let max_features = cfg
            .max_features
            .unwrap_or_else(|| ((dim as f64).sqrt().ceil() as usize).max(1))
            .min(dim);
        let n = train.len();
        let trees = (0..cfg.trees)
            .map(|t| {
                let mut rng = rng_from(derive(seed, t as u64));
                let idx: Vec<usize> = if cfg.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut builder = Builder {
                    data: train,
                    max_features,
                    pseudo_count: cfg.pseudo_count,
                    rng,
                    nodes: Vec::new(),
                };
                builder.grow(idx);
                DecisionTree { nodes: builder.nodes }
            })
            .collect();
        Ok(Self {
            trees,
            num_classes: train.num_classes,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Row `i` comes from tree `i` when `k` equals the tree count; otherwise
    /// trees are drawn uniformly with replacement.
    fn tree_draws(&self, k: usize, seed: u64) -> Vec<usize> {
        let t = self.trees.len();
        if k == t {
            return (0..t).collect();
        }
        let mut rng = rng_from(seed);
        (0..k).map(|_| rng.random_range(0..t)).collect()
    }

    fn tensors(&self, draws: &[usize], inputs: &[Vec<f64>]) -> Vec<PredSampleTensor> {
        inputs
            .iter()
            .map(|x| {
                let data = draws.iter().flat_map(|&t| self.trees[t].predict(x).iter().copied()).collect();
                PredSampleTensor::from_raw(draws.len(), self.num_classes, data)
            })
            .collect()
    }
}

impl StochasticClassifier for RandomForestClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn default_samples(&self) -> usize {
        self.trees.len()
    }

    fn posterior_sampler<'a>(&'a self, anchors: &[Vec<f64>], k: usize, seed: u64) -> Result<Box<dyn PosteriorSampler + 'a>> {
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one posterior sample".into()));
        }
        let draws = self.tree_draws(k, seed);
        Ok(Box::new(PointwiseSampler::new(anchors, move |xs: &[Vec<f64>]| {
            Ok(self.tensors(&draws, xs))
        })?))
    }
}
