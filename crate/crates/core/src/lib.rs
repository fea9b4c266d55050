//! Bayesian active learning with prediction-oriented acquisition.
//!
//! The crate provides categorical and nested Monte Carlo estimators of BALD
//! and EPIG, stochastic classifiers exposing posterior predictive samples,
//! target-input samplers, synthetic data generators, a seeded pool-based
//! active-learning harness, and closed-form Gaussian information quantities.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b): (f64, f64) = ($a, $b);
        assert!((a - b).abs() <= $tol, "{a} vs {b} (tol {})", $tol);
    }};
}

pub mod acquisition;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod models;
pub mod normal;
pub mod prob;
pub mod report;
pub mod seed;
pub mod target;

pub use acquisition::{AcquisitionMethod, AcquisitionScore, TargetBatch};
pub use config::ExperimentConfig;
pub use data::{LabeledSet, SplitRecipe, SubsetSpec};
pub use error::{Error, Result};
pub use experiment::{run_active_learning, run_pool_size_sweep, run_replicated, RunResult};
pub use models::{ModelSpec, PosteriorSampler, StochasticClassifier};
pub use prob::{JointProbMatrix, PredSampleTensor, ProbVector};
pub use seed::{SeedTree, Stream};
pub use target::TargetMode;
