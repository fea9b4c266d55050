//! Target-input sampling: exact target samples, the pool as a proxy, and
//! class-reweighted resampling of the pool.
//!
//! Class reweighting assumes the pool and target share class-conditional
//! input distributions and differ only in their class marginals. Each pool
//! input gets weight
//!
//! ```text
//! w(x) = sum_c p_targ(c) p(c | x) / ((1/N) sum_{x' in pool} p(c | x'))
//! ```
//!
//! and targets are drawn from the categorical with probabilities `w(x) / N`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::ProbVector;
use crate::seed::rng_from;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    ExactTarget,
    PoolProxy,
    ClassReweighted,
}

impl TargetMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::ExactTarget => "exact-target",
            Self::PoolProxy => "pool-proxy",
            Self::ClassReweighted => "class-reweighted",
        }
    }
}

impl std::fmt::Display for TargetMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Non-negative per-pool-input resampling weights with mean one.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampleWeights(Vec<f64>);

impl ResampleWeights {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }
}

/// Computes class-correction weights from the model's predictive marginals
/// on the pool.
pub fn compute_weights(pool_predictions: &[ProbVector], p_targ_y: &ProbVector) -> Result<ResampleWeights> {
    let n = pool_predictions.len();
    if n == 0 {
        return Err(Error::Empty("pool predictions"));
    }
    let classes = p_targ_y.num_classes();
    if pool_predictions.iter().any(|p| p.num_classes() != classes) {
        return Err(Error::InvalidDistribution("pool predictions and target marginal disagree on class count".into()));
    }
    let mut pool_marginal = vec![0.0; classes];
    for p in pool_predictions {
        for (acc, v) in pool_marginal.iter_mut().zip(p.probs()) {
            *acc += v;
        }
    }
    pool_marginal.iter_mut().for_each(|v| *v /= n as f64);

    let mut ratio = vec![0.0; classes];
    for (c, (&target_mass, &pool_mass)) in p_targ_y.probs().iter().zip(&pool_marginal).enumerate() {
        if target_mass > 0.0 {
            if pool_mass <= 0.0 {
                return Err(Error::UnsupportedClass { class: c, target_mass });
            }
            ratio[c] = target_mass / pool_mass;
        }
    }
    Ok(ResampleWeights(
        pool_predictions
            .iter()
            .map(|p| p.probs().iter().zip(&ratio).map(|(pc, r)| pc * r).sum())
            .collect(),
    ))
}

/// Where target inputs come from.
#[derive(Debug, Clone)]
pub enum TargetSampler<'a> {
    /// Uniform draws from a set of genuine target inputs.
    ExactTarget { source: &'a [Vec<f64>] },
    /// Uniform draws from the pool.
    PoolProxy { source: &'a [Vec<f64>] },
    /// Weighted draws from the pool; requires the current model's predictive
    /// marginals on the pool and the target class distribution.
    ClassReweighted {
        source: &'a [Vec<f64>],
        pool_predictions: Option<&'a [ProbVector]>,
        p_targ_y: Option<&'a ProbVector>,
    },
}

impl TargetSampler<'_> {
    pub fn mode(&self) -> TargetMode {
        match self {
            Self::ExactTarget { .. } => TargetMode::ExactTarget,
            Self::PoolProxy { .. } => TargetMode::PoolProxy,
            Self::ClassReweighted { .. } => TargetMode::ClassReweighted,
        }
    }

    fn source(&self) -> &[Vec<f64>] {
        match self {
            Self::ExactTarget { source } | Self::PoolProxy { source } | Self::ClassReweighted { source, .. } => source,
        }
    }

    /// Source indices of `m` draws with replacement.
    pub fn sample_indices(&self, m: usize, seed: u64) -> Result<Vec<usize>> {
        let n = self.source().len();
        if n == 0 {
            return Err(Error::Empty("target source"));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("need at least one target sample".into()));
        }
        let mut rng = rng_from(seed);
        match self {
            Self::ExactTarget { .. } | Self::PoolProxy { .. } => Ok((0..m).map(|_| rng.random_range(0..n)).collect()),
            Self::ClassReweighted { pool_predictions, p_targ_y, .. } => {
                let (Some(preds), Some(p_targ)) = (pool_predictions, p_targ_y) else {
                    return Err(Error::InvalidArgument(
                        "class-reweighted sampling needs pool predictions and p_targ(y*)".into(),
                    ));
                };
                if preds.len() != n {
                    return Err(Error::InvalidArgument(format!("{} predictions for {n} pool inputs", preds.len())));
                }
                let weights = compute_weights(preds, p_targ)?;
                let dist = WeightedIndex::new(weights.values())
                    .map_err(|e| Error::InvalidArgument(format!("resampling weights: {e}")))?;
                Ok((0..m).map(|_| dist.sample(&mut rng)).collect())
            }
        }
    }

    pub fn sample_targets(&self, m: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        let source = self.source();
        Ok(self.sample_indices(m, seed)?.into_iter().map(|i| source[i].clone()).collect())
    }
}
