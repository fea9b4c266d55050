//! Shared fixtures for the estimator benchmarks.

use epig_core::PredSampleTensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` random `k x classes` tensors whose rows are normalized uniforms.
pub fn random_tensors(n: usize, k: usize, classes: usize, seed: u64) -> Vec<PredSampleTensor> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let rows: Vec<Vec<f64>> = (0..k)
                .map(|_| {
                    let raw: Vec<f64> = (0..classes).map(|_| rng.random::<f64>() + 1e-3).collect();
                    let total: f64 = raw.iter().sum();
                    raw.into_iter().map(|v| v / total).collect()
                })
                .collect();
            PredSampleTensor::from_rows(&rows).expect("normalized rows")
        })
        .collect()
}
