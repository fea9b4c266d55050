//! Acquisition scoring: random, predictive entropy, BALD and EPIG.
//!
//! The categorical estimators work on [`PredSampleTensor`]s produced by one
//! posterior-sampling call, so row `i` of every tensor refers to the same
//! parameter draw `theta_i`. The nested Monte Carlo estimators sample labels
//! instead of summing over them and are consistent with the categorical ones.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prob::{entropy, joint_from_samples, marginal_from_samples, PredSampleTensor, ProbVector};
use crate::seed::{derive, rng_from};
use crate::target::TargetMode;

/// Default number of target inputs drawn per acquisition step.
pub const DEFAULT_TARGET_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AcquisitionMethod {
    Random,
    Entropy,
    Bald,
    Epig,
    EpigMc,
}

impl AcquisitionMethod {
    pub const ALL: [AcquisitionMethod; 5] = [Self::Random, Self::Entropy, Self::Bald, Self::Epig, Self::EpigMc];

    pub fn name(self) -> &'static str {
        match self {
            Self::Random => "random",
            Self::Entropy => "entropy",
            Self::Bald => "bald",
            Self::Epig => "epig",
            Self::EpigMc => "epig-mc",
        }
    }

    pub fn needs_targets(self) -> bool {
        matches!(self, Self::Epig | Self::EpigMc)
    }

    pub fn needs_predictions(self) -> bool {
        self != Self::Random
    }
}

impl std::fmt::Display for AcquisitionMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for AcquisitionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown acquisition `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcquisitionScore {
    pub candidate_index: usize,
    pub score: f64,
    pub estimator: AcquisitionMethod,
}

/// Posterior-sample tensors for `M` target inputs, row-aligned with the
/// candidate tensors they are scored against.
#[derive(Debug, Clone)]
pub struct TargetBatch {
    tensors: Vec<PredSampleTensor>,
    mode: TargetMode,
}

impl TargetBatch {
    pub fn new(tensors: Vec<PredSampleTensor>, mode: TargetMode) -> Result<Self> {
        let first = tensors.first().ok_or(Error::Empty("target batch"))?;
        let (k, c) = (first.num_samples(), first.num_classes());
        for t in &tensors {
            if t.num_samples() != k {
                return Err(Error::Alignment { expected: k, found: t.num_samples() });
            }
            if t.num_classes() != c {
                return Err(Error::InvalidDistribution("target tensors disagree on class count".into()));
            }
        }
        Ok(Self { tensors, mode })
    }

    pub fn tensors(&self) -> &[PredSampleTensor] {
        &self.tensors
    }

    pub fn mode(&self) -> TargetMode {
        self.mode
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_samples(&self) -> usize {
        self.tensors[0].num_samples()
    }
}

/// `H[mean_i p(y|x,theta_i)] - mean_i H[p(y|x,theta_i)]`.
pub fn bald_categorical(t: &PredSampleTensor) -> f64 {
    let mean_entropy = t.rows().map(entropy).sum::<f64>() / t.num_samples() as f64;
    (marginal_from_samples(t).entropy() - mean_entropy).max(0.0)
}

/// Entropy of the Monte Carlo marginal predictive.
pub fn predictive_entropy(t: &PredSampleTensor) -> f64 {
    marginal_from_samples(t).entropy()
}

fn xlogx(v: f64) -> f64 {
    if v > 0.0 { v * v.ln() } else { 0.0 }
}

// Mutual information of a joint against its own marginals. Every cell with
// mass has strictly positive marginals, so no floor is needed.
fn own_marginal_mi(joint: &[f64], p: &[f64], q: &[f64]) -> f64 {
    let cols = q.len();
    let mut total = 0.0;
    for (r, pr) in p.iter().enumerate() {
        for (c, qc) in q.iter().enumerate() {
            let j = joint[r * cols + c];
            if j > 0.0 {
                total += j * (j.ln() - pr.ln() - qc.ln());
            }
        }
    }
    total
}

/// Plug-in EPIG: the mean over targets of the KL divergence between the
/// Monte Carlo joint predictive and the product of its marginals.
pub fn epig_categorical(t_x: &PredSampleTensor, targets: &TargetBatch) -> Result<f64> {
    if targets.num_samples() != t_x.num_samples() {
        return Err(Error::Alignment { expected: t_x.num_samples(), found: targets.num_samples() });
    }
    let p = marginal_from_samples(t_x);
    let mut total = 0.0;
    for t_star in targets.tensors() {
        let joint = joint_from_samples(t_x, t_star)?;
        let q = marginal_from_samples(t_star);
        total += own_marginal_mi(joint.probs(), p.probs(), q.probs()).max(0.0);
    }
    Ok(total / targets.len() as f64)
}

/// Batched plug-in EPIG for many candidates against one target batch.
///
/// Equivalent to calling [`epig_categorical`] per candidate but forms all
/// joints with a single matrix product. Only the leading `(C-1) x (C*-1)`
/// block of each joint is multiplied out; the last row and column follow
/// from the marginals.
pub fn epig_categorical_batch(candidates: &[PredSampleTensor], targets: &TargetBatch) -> Result<Vec<f64>> {
    let Some(first) = candidates.first() else {
        return Ok(Vec::new());
    };
    let k = targets.num_samples();
    let c = first.num_classes();
    let cs = targets.tensors()[0].num_classes();
    let m = targets.len();
    for t in candidates {
        if t.num_samples() != k {
            return Err(Error::Alignment { expected: k, found: t.num_samples() });
        }
        if t.num_classes() != c {
            return Err(Error::InvalidDistribution("candidates disagree on the number of classes".into()));
        }
    }
    let b = candidates.len();
    let (rc, rs) = (c - 1, cs - 1);
    // (B*(C-1)) x K: one row per (candidate, leading class).
    let left = DMatrix::from_fn(b * rc, k, |r, i| candidates[r / rc].row(i)[r % rc]);
    // K x (M*(C*-1)): one column per (target, leading class).
    let right = DMatrix::from_fn(k, m * rs, |i, col| targets.tensors()[col / rs].row(i)[col % rs]);
    let joints = (left * right) / k as f64;

    let cand_marg: Vec<ProbVector> = candidates.iter().map(marginal_from_samples).collect();
    let targ_marg: Vec<ProbVector> = targets.tensors().iter().map(marginal_from_samples).collect();
    // With exact marginals, I = sum j ln j + H(p) + H(q).
    let entropy = |p: &ProbVector| -p.probs().iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>();
    let targ_entropy: Vec<f64> = targ_marg.iter().map(entropy).collect();
    let mut col_sums = vec![0.0; cs];
    let scores = (0..b)
        .map(|cand| {
            let p = cand_marg[cand].probs();
            let cand_entropy = entropy(&cand_marg[cand]);
            let mut total = 0.0;
            for (j, q) in targ_marg.iter().enumerate() {
                let q = q.probs();
                col_sums.fill(0.0);
                let mut plogp = 0.0;
                for y in 0..rc {
                    let mut row_sum = 0.0;
                    for ys in 0..rs {
                        let v = joints[(cand * rc + y, j * rs + ys)];
                        plogp += xlogx(v);
                        row_sum += v;
                        col_sums[ys] += v;
                    }
                    let last = p[y] - row_sum;
                    plogp += xlogx(last);
                    col_sums[rs] += last;
                }
                for ys in 0..cs {
                    plogp += xlogx(q[ys] - col_sums[ys]);
                }
                total += (plogp + cand_entropy + targ_entropy[j]).max(0.0);
            }
            total / m as f64
        })
        .collect();
    Ok(scores)
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
    pub draws: usize,
}

impl McEstimate {
    fn from_terms(terms: &[f64]) -> Self {
        let n = terms.len() as f64;
        let mean = terms.iter().sum::<f64>() / n;
        let var = if terms.len() > 1 {
            terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std_err: (var / n).sqrt(), draws: terms.len() }
    }
}

/// A model that can draw parameters and evaluate label likelihoods under them.
pub trait PosteriorSimulator {
    type Theta;
    type Input: ?Sized;

    fn draw_theta(&self, rng: &mut ChaCha8Rng) -> Self::Theta;

    /// `p(y | x, theta)` for every class.
    fn label_probs(&self, theta: &Self::Theta, x: &Self::Input) -> Vec<f64>;
}

fn sample_class(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    for (c, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return c;
        }
    }
    // Rounding can leave u at the very top; fall back to the last class with mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
}

fn tensor_at<S: PosteriorSimulator>(sim: &S, inner: &[S::Theta], x: &S::Input) -> Result<PredSampleTensor> {
    let rows: Vec<Vec<f64>> = inner.iter().map(|th| sim.label_probs(th, x)).collect();
    PredSampleTensor::from_rows(&rows)
}

fn bald_mc_terms(t: &PredSampleTensor, m: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let k = t.num_samples();
    let marg = marginal_from_samples(t);
    (0..m)
        .map(|_| {
            let i = rng.random_range(0..k);
            let y = sample_class(t.row(i), rng);
            crate::prob::clamped_ln(t.row(i)[y]) - crate::prob::clamped_ln(marg.probs()[y])
        })
        .collect()
}

fn epig_mc_term(t_x: &PredSampleTensor, t_star: &PredSampleTensor, rng: &mut ChaCha8Rng) -> f64 {
    let k = t_x.num_samples();
    let i = rng.random_range(0..k);
    let y = sample_class(t_x.row(i), rng);
    let ys = sample_class(t_star.row(i), rng);
    let (mut sa, mut sb, mut sab) = (0.0, 0.0, 0.0);
    for (a, b) in t_x.rows().zip(t_star.rows()) {
        sa += a[y];
        sb += b[ys];
        sab += a[y] * b[ys];
    }
    (k as f64 * sab / (sa * sb)).ln()
}

/// Nested Monte Carlo BALD: `M` outer draws of `(theta_j, y_j)` against `K`
/// inner parameter draws.
///
/// The outer parameter is drawn from the inner set, so the estimator is
/// unbiased for [`bald_categorical`] evaluated on those inner draws and is
/// exactly zero when `K = 1`.
pub fn bald_nested_mc<S: PosteriorSimulator>(sim: &S, x: &S::Input, m: usize, k: usize, seed: u64) -> Result<McEstimate> {
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument("nested Monte Carlo needs M, K >= 1".into()));
    }
    let mut rng = rng_from(seed);
    let inner: Vec<S::Theta> = (0..k).map(|_| sim.draw_theta(&mut rng)).collect();
    let t = tensor_at(sim, &inner, x)?;
    Ok(McEstimate::from_terms(&bald_mc_terms(&t, m, &mut rng)))
}

/// Nested Monte Carlo EPIG: each outer draw samples a target input, a shared
/// parameter, and the pair `(y, y*)` given that parameter.
pub fn epig_nested_mc<S, F>(
    sim: &S,
    x: &S::Input,
    mut sample_target: F,
    m: usize,
    k: usize,
    seed: u64,
) -> Result<McEstimate>
where
    S: PosteriorSimulator,
    S::Input: Sized,
    F: FnMut(&mut ChaCha8Rng) -> S::Input,
{
    if m == 0 || k == 0 {
        return Err(Error::InvalidArgument("nested Monte Carlo needs M, K >= 1".into()));
    }
    let mut rng = rng_from(seed);
    let inner: Vec<S::Theta> = (0..k).map(|_| sim.draw_theta(&mut rng)).collect();
    let t_x = tensor_at(sim, &inner, x)?;
    let mut terms = Vec::with_capacity(m);
    for _ in 0..m {
        let x_star = sample_target(&mut rng);
        let t_star = tensor_at(sim, &inner, &x_star)?;
        terms.push(epig_mc_term(&t_x, &t_star, &mut rng));
    }
    Ok(McEstimate::from_terms(&terms))
}

/// Nested Monte Carlo BALD over an existing set of posterior samples.
pub fn bald_nested_mc_tensor(t: &PredSampleTensor, m: usize, seed: u64) -> McEstimate {
    McEstimate::from_terms(&bald_mc_terms(t, m.max(1), &mut rng_from(seed)))
}

/// Nested Monte Carlo EPIG over existing posterior samples: one outer draw
/// per target tensor.
pub fn epig_nested_mc_tensor(t_x: &PredSampleTensor, targets: &TargetBatch, seed: u64) -> Result<McEstimate> {
    if targets.num_samples() != t_x.num_samples() {
        return Err(Error::Alignment { expected: t_x.num_samples(), found: targets.num_samples() });
    }
    let mut rng = rng_from(seed);
    let terms: Vec<f64> = targets.tensors().iter().map(|t| epig_mc_term(t_x, t, &mut rng)).collect();
    Ok(McEstimate::from_terms(&terms))
}

/// Seeded permutation ranks: a uniformly random candidate gets the top score.
pub fn random_scores(indices: &[usize], seed: u64) -> Vec<AcquisitionScore> {
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.shuffle(&mut rng_from(seed));
    let mut scores = vec![0.0; indices.len()];
    let n = indices.len() as f64;
    for (rank, pos) in order.into_iter().enumerate() {
        scores[pos] = n - rank as f64;
    }
    indices
        .iter()
        .zip(scores)
        .map(|(&candidate_index, score)| AcquisitionScore { candidate_index, score, estimator: AcquisitionMethod::Random })
        .collect()
}

/// Scores candidates whose pool indices are given alongside their tensors.
pub fn score_candidates(
    candidates: &[PredSampleTensor],
    indices: &[usize],
    targets: Option<&TargetBatch>,
    method: AcquisitionMethod,
    seed: u64,
) -> Result<Vec<AcquisitionScore>> {
    if indices.is_empty() {
        return Err(Error::Empty("pool"));
    }
    if method != AcquisitionMethod::Random && candidates.len() != indices.len() {
        return Err(Error::InvalidArgument(format!(
            "{} candidate tensors for {} indices",
            candidates.len(),
            indices.len()
        )));
    }
    let need_targets = || targets.ok_or_else(|| Error::InvalidArgument(format!("{method} needs a target batch")));
    let values: Vec<f64> = match method {
        AcquisitionMethod::Random => return Ok(random_scores(indices, seed)),
        AcquisitionMethod::Entropy => candidates.iter().map(predictive_entropy).collect(),
        AcquisitionMethod::Bald => candidates.iter().map(bald_categorical).collect(),
        AcquisitionMethod::Epig => epig_categorical_batch(candidates, need_targets()?)?,
        AcquisitionMethod::EpigMc => {
            let targets = need_targets()?;
            candidates
                .iter()
                .zip(indices)
                .map(|(t, &i)| epig_nested_mc_tensor(t, targets, derive(seed, i as u64)).map(|e| e.mean))
                .collect::<Result<_>>()?
        }
    };
    Ok(indices
        .iter()
        .zip(values)
        .map(|(&candidate_index, score)| AcquisitionScore { candidate_index, score, estimator: method })
        .collect())
}

/// Scores every pool element; indices are positions in `candidates`.
pub fn score_pool(
    candidates: &[PredSampleTensor],
    targets: Option<&TargetBatch>,
    method: AcquisitionMethod,
    seed: u64,
) -> Result<Vec<AcquisitionScore>> {
    let indices: Vec<usize> = (0..candidates.len()).collect();
    score_candidates(candidates, &indices, targets, method, seed)
}

/// Index of the best score; exact ties are broken uniformly at random.
pub fn select_argmax(scores: &[AcquisitionScore], seed: u64) -> Result<usize> {
    let best = scores
        .iter()
        .map(|s| s.score)
        .fold(f64::NEG_INFINITY, f64::max);
    let tied: Vec<usize> = scores
        .iter()
        .filter(|s| s.score == best)
        .map(|s| s.candidate_index)
        .collect();
    match tied.len() {
        0 => Err(Error::Empty("score list")),
        1 => Ok(tied[0]),
        n => Ok(tied[rng_from(seed).random_range(0..n)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tensor(rows: &[[f64; 2]]) -> PredSampleTensor {
        PredSampleTensor::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn batch(ts: Vec<PredSampleTensor>) -> TargetBatch {
        TargetBatch::new(ts, TargetMode::ExactTarget).unwrap()
    }

    /// Uniform prior over a fixed set of tabulated hypotheses.
    struct Grid(Vec<Vec<f64>>);

    impl PosteriorSimulator for Grid {
        type Theta = usize;
        type Input = usize;

        fn draw_theta(&self, rng: &mut ChaCha8Rng) -> usize {
            rng.random_range(0..self.0.len())
        }

        fn label_probs(&self, theta: &usize, x: &usize) -> Vec<f64> {
            // Input 0 uses the tabulated row; other inputs reuse it.
            let _ = x;
            self.0[*theta].clone()
        }
    }

    #[test]
    fn bald_examples() {
        assert_close!(bald_categorical(&tensor(&[[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]])), 0.0, 1e-15);
        assert_close!(bald_categorical(&tensor(&[[0.9, 0.1], [0.1, 0.9]])), 0.368064, 1e-6);
        assert_close!(bald_categorical(&tensor(&[[1.0, 0.0], [0.0, 1.0]])), std::f64::consts::LN_2, 1e-12);
    }

    #[test]
    fn predictive_entropy_examples() {
        assert_close!(predictive_entropy(&tensor(&[[0.5, 0.5]])), std::f64::consts::LN_2, 1e-12);
        assert_eq!(predictive_entropy(&tensor(&[[1.0, 0.0]])), 0.0);
        assert_close!(predictive_entropy(&tensor(&[[0.9, 0.1], [0.1, 0.9]])), std::f64::consts::LN_2, 1e-12);
    }

    #[test]
    fn epig_examples() {
        let flat = tensor(&[[0.3, 0.7], [0.3, 0.7]]);
        let t = tensor(&[[0.9, 0.1], [0.1, 0.9]]);
        assert_close!(epig_categorical(&flat, &batch(vec![t.clone()])).unwrap(), 0.0, 1e-15);
        assert_close!(epig_categorical(&t, &batch(vec![t.clone()])).unwrap(), 0.22175, 1e-5);
        let uniform = tensor(&[[0.5, 0.5], [0.5, 0.5]]);
        assert_close!(epig_categorical(&t, &batch(vec![uniform])).unwrap(), 0.0, 1e-15);
    }

    #[test]
    fn epig_alignment_error() {
        let t = tensor(&[[0.9, 0.1], [0.1, 0.9]]);
        let short = batch(vec![tensor(&[[0.5, 0.5]])]);
        assert!(matches!(epig_categorical(&t, &short), Err(Error::Alignment { .. })));
        assert!(TargetBatch::new(vec![t.clone(), tensor(&[[0.5, 0.5]])], TargetMode::PoolProxy).is_err());
    }

    #[test]
    fn batch_epig_matches_per_candidate() {
        let targets = batch(vec![
            tensor(&[[0.9, 0.1], [0.2, 0.8], [0.6, 0.4]]),
            tensor(&[[0.5, 0.5], [0.1, 0.9], [0.99, 0.01]]),
        ]);
        let cands = vec![
            tensor(&[[0.9, 0.1], [0.1, 0.9], [0.5, 0.5]]),
            tensor(&[[0.3, 0.7], [0.3, 0.7], [0.3, 0.7]]),
            tensor(&[[1.0, 0.0], [0.0, 1.0], [0.7, 0.3]]),
        ];
        let batched = epig_categorical_batch(&cands, &targets).unwrap();
        for (c, b) in cands.iter().zip(&batched) {
            assert_close!(epig_categorical(c, &targets).unwrap(), *b, 1e-12);
        }
    }

    #[test]
    fn nested_bald_examples() {
        let det = Grid(vec![vec![0.3, 0.7]; 3]);
        assert_close!(bald_nested_mc(&det, &0, 1000, 5, 1).unwrap().mean, 0.0, 1e-15);
        let two = Grid(vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert_eq!(bald_nested_mc(&two, &0, 1000, 1, 2).unwrap().mean, 0.0);

        let t = tensor(&[[0.9, 0.1], [0.1, 0.9]]);
        let est = bald_nested_mc_tensor(&t, 100_000, 3);
        assert!((est.mean - 0.368064).abs() < 3.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn nested_epig_examples() {
        let det = Grid(vec![vec![0.3, 0.7]; 2]);
        let est = epig_nested_mc(&det, &0, |_| 0, 1000, 4, 5).unwrap();
        assert_close!(est.mean, 0.0, 1e-15);
        let two = Grid(vec![vec![0.9, 0.1], vec![0.1, 0.9]]);
        assert_eq!(epig_nested_mc(&two, &0, |_| 0, 1000, 1, 6).unwrap().mean, 0.0);

        let t = tensor(&[[0.9, 0.1], [0.1, 0.9]]);
        let targets = batch(vec![t.clone(); 100_000]);
        let est = epig_nested_mc_tensor(&t, &targets, 7).unwrap();
        assert!((est.mean - 0.22175369).abs() < 3.0 * est.std_err, "{est:?}");
    }

    #[test]
    fn score_pool_examples() {
        let t = tensor(&[[0.9, 0.1], [0.1, 0.9]]);
        let flat = tensor(&[[0.3, 0.7], [0.3, 0.7]]);
        for method in AcquisitionMethod::ALL {
            let targets = batch(vec![t.clone()]);
            let scores = score_pool(std::slice::from_ref(&t), Some(&targets), method, 0).unwrap();
            assert_eq!(scores.len(), 1);
        }
        let pool = vec![flat, t.clone()];
        for method in [AcquisitionMethod::Bald, AcquisitionMethod::Epig] {
            let scores = score_pool(&pool, Some(&batch(vec![t.clone()])), method, 0).unwrap();
            assert_close!(scores[0].score, 0.0, 1e-15);
            assert!(scores[1].score > 0.1);
            assert_eq!(select_argmax(&scores, 0).unwrap(), 1);
        }
        assert!(matches!(score_pool(&[], None, AcquisitionMethod::Bald, 0), Err(Error::Empty(_))));
        assert!(score_pool(&pool, None, AcquisitionMethod::Epig, 0).is_err());
    }

    #[test]
    fn random_scores_are_seeded_permutation_ranks() {
        let idx: Vec<usize> = (0..20).collect();
        let a = random_scores(&idx, 11);
        let b = random_scores(&idx, 11);
        assert_eq!(a, b);
        let mut ranks: Vec<f64> = a.iter().map(|s| s.score).collect();
        ranks.sort_by(f64::total_cmp);
        assert_eq!(ranks, (1..=20).map(|r| r as f64).collect::<Vec<_>>());
        assert_ne!(a, random_scores(&idx, 12));
    }

    fn scores(values: &[f64]) -> Vec<AcquisitionScore> {
        values
            .iter()
            .enumerate()
            .map(|(i, &score)| AcquisitionScore { candidate_index: i, score, estimator: AcquisitionMethod::Bald })
            .collect()
    }

    #[test]
    fn argmax_examples() {
        assert_eq!(select_argmax(&scores(&[0.1, 0.5, 0.3]), 9).unwrap(), 1);
        let flat = scores(&[0.2; 6]);
        assert_eq!(select_argmax(&flat, 4).unwrap(), select_argmax(&flat, 4).unwrap());
        assert!(select_argmax(&[], 0).is_err());
    }

    #[test]
    fn argmax_tie_break_is_fair() {
        let tied = scores(&[0.1, 0.7, 0.7]);
        let n = 10_000;
        let ones = (0..n).filter(|s| select_argmax(&tied, *s).unwrap() == 1).count();
        let freq = ones as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn method_names_round_trip() {
        for m in AcquisitionMethod::ALL {
            assert_eq!(m.name().parse::<AcquisitionMethod>().unwrap(), m);
        }
        assert!("bald2".parse::<AcquisitionMethod>().is_err());
    }
}
