//! Stochastic classifiers exposing posterior predictive samples.
//!
//! A parameter draw `theta_i` is shared by every input evaluated through one
//! [`PosteriorSampler`], so the `i`-th rows of all tensors it produces are
//! aligned.

use serde::{Deserialize, Serialize};

use crate::data::LabeledSet;
use crate::error::Result;
use crate::prob::{PredSampleTensor, ProbVector};

pub mod discrete;
pub mod forest;
pub mod gp;
pub mod mlp;

pub use discrete::DiscreteBayesClassifier;
pub use forest::{ForestConfig, RandomForestClassifier};
pub use gp::{GpConfig, GpProbitClassifier};
pub use mlp::{DropoutMlp, MlpConfig};

/// Fixed posterior draws that can be evaluated at arbitrary inputs.
pub trait PosteriorSampler: Send + Sync {
    /// Tensors at the anchor inputs the sampler was created with. For every
    /// model the draws are exact jointly over these inputs.
    fn anchor_tensors(&self) -> &[PredSampleTensor];

    /// Tensors at further inputs, row-aligned with the anchors. Repeated
    /// calls with the same input give identical rows.
    fn sample(&self, inputs: &[Vec<f64>]) -> Result<Vec<PredSampleTensor>>;
}

pub trait StochasticClassifier: Send + Sync {
    fn num_classes(&self) -> usize;

    /// Native number of posterior samples.
    fn default_samples(&self) -> usize;

    /// Draws `k` parameter values with `seed`, exact jointly over `anchors`.
    fn posterior_sampler<'a>(&'a self, anchors: &[Vec<f64>], k: usize, seed: u64) -> Result<Box<dyn PosteriorSampler + 'a>>;

    /// `k` aligned posterior samples at every input.
    fn predict_samples(&self, inputs: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<PredSampleTensor>> {
        Ok(self.posterior_sampler(inputs, k, seed)?.anchor_tensors().to_vec())
    }

    /// Marginal predictive distributions used for evaluation. Models without
    /// a closed form average their native number of samples.
    fn predict_marginal(&self, inputs: &[Vec<f64>], seed: u64) -> Result<Vec<ProbVector>> {
        Ok(self
            .predict_samples(inputs, self.default_samples(), seed)?
            .iter()
            .map(PredSampleTensor::marginal)
            .collect())
    }
}

/// Sampler for models whose parameter draws are evaluated independently at
/// each input (trees, dropout masks, hypotheses).
pub(crate) struct PointwiseSampler<F> {
    anchors: Vec<PredSampleTensor>,
    eval: F,
}

impl<F> PointwiseSampler<F>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<PredSampleTensor>> + Send + Sync,
{
    pub(crate) fn new(anchors: &[Vec<f64>], eval: F) -> Result<Self> {
        let anchors = eval(anchors)?;
        Ok(Self { anchors, eval })
    }
}

impl<F> PosteriorSampler for PointwiseSampler<F>
where
    F: Fn(&[Vec<f64>]) -> Result<Vec<PredSampleTensor>> + Send + Sync,
{
    fn anchor_tensors(&self) -> &[PredSampleTensor] {
        &self.anchors
    }

    fn sample(&self, inputs: &[Vec<f64>]) -> Result<Vec<PredSampleTensor>> {
        (self.eval)(inputs)
    }
}

/// Model family and hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelSpec {
    Gp(GpConfig),
    Forest(ForestConfig),
    Mlp(MlpConfig),
    Discrete(discrete::DiscreteConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Gp(_) => "gp",
            Self::Forest(_) => "forest",
            Self::Mlp(_) => "mlp",
            Self::Discrete(_) => "discrete",
        }
    }

    /// Trains a fresh model. `validation` is only used by the network.
    pub fn fit(&self, train: &LabeledSet, validation: &LabeledSet, seed: u64) -> Result<Box<dyn StochasticClassifier>> {
        Ok(match self {
            Self::Gp(cfg) => Box::new(GpProbitClassifier::fit(train, cfg)?),
            Self::Forest(cfg) => Box::new(RandomForestClassifier::fit(train, cfg, seed)?),
            Self::Mlp(cfg) => Box::new(DropoutMlp::fit(train, validation, cfg, seed)?),
            Self::Discrete(cfg) => Box::new(DiscreteBayesClassifier::from_config(cfg)?.fit(train)?),
        })
    }

    pub fn default_samples(&self) -> usize {
        match self {
            Self::Gp(_) => gp::DEFAULT_SAMPLES,
            Self::Forest(cfg) => cfg.trees,
            Self::Mlp(_) => mlp::DEFAULT_SAMPLES,
            Self::Discrete(_) => discrete::DEFAULT_SAMPLES,
        }
    }
}

/// Inputs with bitwise-identical coordinates share one slot.
pub(crate) fn dedupe(inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut seen = std::collections::HashMap::new();
    let mut unique = Vec::new();
    let slots = inputs
        .iter()
        .map(|x| {
            let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
            *seen.entry(key).or_insert_with(|| {
                unique.push(x.clone());
                unique.len() - 1
            })
        })
        .collect();
    (unique, slots)
}
