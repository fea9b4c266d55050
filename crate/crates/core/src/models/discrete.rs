//! Exact Bayesian classifier over a finite set of hypotheses.
//!
//! Each hypothesis is a table of label distributions over a finite input
//! support. Updates and predictions are exact, which makes the model a
//! brute-force reference for the estimators.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{PointwiseSampler, PosteriorSampler, StochasticClassifier};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::prob::{PredSampleTensor, ProbVector};
use crate::seed::rng_from;

pub const DEFAULT_SAMPLES: usize = 1000;

/// Serializable description: `tables[h][i]` is `p(y | inputs[i], theta_h)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteConfig {
    pub inputs: Vec<Vec<f64>>,
    pub tables: Vec<Vec<Vec<f64>>>,
    #[serde(default)]
    pub prior: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteBayesClassifier {
    inputs: Vec<Vec<f64>>,
    tables: Vec<Vec<ProbVector>>,
    weights: Vec<f64>,
    num_classes: usize,
}

impl DiscreteBayesClassifier {
    pub fn new(inputs: Vec<Vec<f64>>, tables: Vec<Vec<ProbVector>>, prior: Vec<f64>) -> Result<Self> {
        if tables.is_empty() {
            return Err(Error::Empty("hypothesis set"));
        }
        if prior.len() != tables.len() {
            return Err(Error::InvalidArgument(format!(
                "{} prior weights for {} hypotheses",
                prior.len(),
                tables.len()
            )));
        }
        let num_classes = tables[0].first().map_or(0, ProbVector::num_classes);
        for table in &tables {
            if table.len() != inputs.len() || table.iter().any(|p| p.num_classes() != num_classes) {
                return Err(Error::InvalidArgument("hypothesis tables must cover every input with the same classes".into()));
            }
        }
        let weights = ProbVector::normalized(prior)?.into_inner();
        Ok(Self {
            inputs,
            tables,
            weights,
            num_classes,
        })
    }

    /// Uniform prior over the hypotheses.
    pub fn uniform(inputs: Vec<Vec<f64>>, tables: Vec<Vec<ProbVector>>) -> Result<Self> {
        let h = tables.len();
        Self::new(inputs, tables, vec![1.0; h])
    }

    pub fn from_config(cfg: &DiscreteConfig) -> Result<Self> {
        let tables = cfg
            .tables
            .iter()
            .map(|t| t.iter().map(|p| ProbVector::new(p.clone())).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let prior = cfg.prior.clone().unwrap_or_else(|| vec![1.0; tables.len()]);
        Self::new(cfg.inputs.clone(), tables, prior)
    }

    /// Conditions on every labelled example in order.
    pub fn fit(mut self, train: &LabeledSet) -> Result<Self> {
        for (x, &y) in train.inputs.iter().zip(&train.labels) {
            self.update(x, y)?;
        }
        Ok(self)
    }

    pub fn num_hypotheses(&self) -> usize {
        self.tables.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    /// `p(y | x_i, theta_h)`.
    pub fn likelihood(&self, h: usize, i: usize) -> &ProbVector {
        &self.tables[h][i]
    }

    pub fn index_of(&self, x: &[f64]) -> Result<usize> {
        self.inputs
            .iter()
            .position(|u| u.len() == x.len() && u.iter().zip(x).all(|(a, b)| a.to_bits() == b.to_bits()))
            .ok_or_else(|| Error::InvalidArgument(format!("input {x:?} is not covered by the hypothesis tables")))
    }

    pub fn update(&mut self, x: &[f64], y: usize) -> Result<()> {
        let i = self.index_of(x)?;
        self.update_index(i, y)
    }

    /// Exact Bayes rule, `w_h <- w_h p(y | x_i, theta_h) / Z`.
    pub fn update_index(&mut self, i: usize, y: usize) -> Result<()> {
        if y >= self.num_classes {
            return Err(Error::InvalidArgument(format!("label {y} outside {} classes", self.num_classes)));
        }
        let unnorm: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.tables)
            .map(|(w, t)| w * t[i].probs()[y])
            .collect();
        let z: f64 = unnorm.iter().sum();
        if z <= 0.0 || !z.is_finite() {
            return Err(Error::ImpossibleObservation);
        }
        self.weights = unnorm.into_iter().map(|w| w / z).collect();
        Ok(())
    }

    /// Posterior predictive at support input `i`.
    pub fn predict_index(&self, i: usize) -> ProbVector {
        let mut p = vec![0.0; self.num_classes];
        for (w, t) in self.weights.iter().zip(&self.tables) {
            for (acc, q) in p.iter_mut().zip(t[i].probs()) {
                *acc += w * q;
            }
        }
        ProbVector::normalized(p).expect("mixture of distributions")
    }

    pub fn predict(&self, x: &[f64]) -> Result<ProbVector> {
        Ok(self.predict_index(self.index_of(x)?))
    }

    /// `k` hypotheses drawn i.i.d. from the posterior weights.
    pub fn draw_hypotheses(&self, k: usize, seed: u64) -> Vec<usize> {
        let dist = WeightedIndex::new(&self.weights).expect("posterior weights are a distribution");
        let mut rng = rng_from(seed);
        (0..k).map(|_| dist.sample(&mut rng)).collect()
    }

    fn tensors(&self, draws: &[usize], inputs: &[Vec<f64>]) -> Result<Vec<PredSampleTensor>> {
        inputs
            .iter()
            .map(|x| {
                let i = self.index_of(x)?;
                let data = draws.iter().flat_map(|&h| self.tables[h][i].probs().iter().copied()).collect();
                Ok(PredSampleTensor::from_raw(draws.len(), self.num_classes, data))
            })
            .collect()
    }
}

impl StochasticClassifier for DiscreteBayesClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn default_samples(&self) -> usize {
        DEFAULT_SAMPLES
    }

    fn posterior_sampler<'a>(&'a self, anchors: &[Vec<f64>], k: usize, seed: u64) -> Result<Box<dyn PosteriorSampler + 'a>> {
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one posterior sample".into()));
        }
        let draws = self.draw_hypotheses(k, seed);
        Ok(Box::new(PointwiseSampler::new(anchors, move |xs: &[Vec<f64>]| self.tensors(&draws, xs))?))
    }

    fn predict_marginal(&self, inputs: &[Vec<f64>], _seed: u64) -> Result<Vec<ProbVector>> {
        inputs.iter().map(|x| self.predict(x)).collect()
    }
}
