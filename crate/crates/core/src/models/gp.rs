//! Binary Gaussian-process classifier with a probit likelihood.
//!
//! The variational posterior is a full-rank Gaussian over whitened latent
//! values `v` at the training inputs, `f = L_K v` with `K = L_K L_K^T`, and
//! `q(v) = N(m, S S^T)` with `S` lower triangular. The prior on `v` is
//! standard normal, so the KL term is cheap and well conditioned.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{dedupe, PosteriorSampler, StochasticClassifier};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::normal::{self, GaussHermite};
use crate::prob::{PredSampleTensor, ProbVector};
use crate::seed::rng_from;

pub const DEFAULT_SAMPLES: usize = 5000;

const JITTER_START: f64 = 1e-6;
const JITTER_MAX: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub amplitude: f64,
    pub lengthscale: f64,
    pub steps: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub quadrature_nodes: usize,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            amplitude: 10.0,
            lengthscale: 1.0,
            steps: 10_000,
            learning_rate: 0.005,
            momentum: 0.95,
            quadrature_nodes: 32,
        }
    }
}

impl GpConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            problems.push(format!("gp amplitude must be positive, got {}", self.amplitude));
        }
        if !(self.lengthscale > 0.0 && self.lengthscale.is_finite()) {
            problems.push(format!("gp lengthscale must be positive, got {}", self.lengthscale));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("gp learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            problems.push(format!("gp momentum must lie in [0, 1), got {}", self.momentum));
        }
        if self.quadrature_nodes == 0 {
            problems.push("gp quadrature_nodes must be at least 1".into());
        }
        problems
    }

    fn kernel(&self, a: &[f64], b: &[f64]) -> f64 {
        let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        self.amplitude * (-0.5 * d2 / (self.lengthscale * self.lengthscale)).exp()
    }

    fn cross(&self, rows: &[Vec<f64>], cols: &[Vec<f64>]) -> DMatrix<f64> {
        DMatrix::from_fn(rows.len(), cols.len(), |i, j| self.kernel(&rows[i], &cols[j]))
    }
}

/// Lower Cholesky factor of `mat + jitter * I`, escalating the jitter by
/// factors of ten.
fn jittered_cholesky(mat: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let n = mat.nrows();
    let mut jitter = JITTER_START * scale;
    loop {
        let mut m = mat.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(chol.unpack());
        }
        if jitter >= JITTER_MAX * scale * (1.0 - 1e-9) {
            return Err(Error::IllConditioned { jitter });
        }
        jitter *= 10.0;
    }
}

fn solve_lower(l: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if l.nrows() == 0 {
        return Ok(DMatrix::zeros(0, b.ncols()));
    }
    l.solve_lower_triangular(b)
        .ok_or_else(|| Error::Factorization("singular triangular factor".into()))
}

/// Explicit inverse of a lower factor, so repeated solves become products.
fn lower_inverse(l: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    solve_lower(l, &DMatrix::identity(l.nrows(), l.nrows()))
}

/// Evidence lower bound as a function of the variational parameters.
///
/// Parameters are flattened as `m` followed by the lower triangle of `S`
/// in row-major order.
#[derive(Debug, Clone)]
pub struct ElboObjective {
    chol: DMatrix<f64>,
    signs: Vec<f64>,
    quadrature: GaussHermite,
}

impl ElboObjective {
    pub fn new(train: &LabeledSet, cfg: &GpConfig) -> Result<Self> {
        if train.num_classes != 2 {
            return Err(Error::InvalidArgument(format!(
                "probit GP is binary, got {} classes",
                train.num_classes
            )));
        }
        let gram = cfg.cross(&train.inputs, &train.inputs);
        Ok(Self {
            chol: jittered_cholesky(&gram, cfg.amplitude)?,
            signs: train.labels.iter().map(|&y| if y == 1 { 1.0 } else { -1.0 }).collect(),
            quadrature: GaussHermite::new(cfg.quadrature_nodes),
        })
    }

    pub fn num_points(&self) -> usize {
        self.signs.len()
    }

    pub fn num_params(&self) -> usize {
        let n = self.num_points();
        n + n * (n + 1) / 2
    }

    /// Parameters of the prior, `m = 0` and `S = I`.
    pub fn initial_params(&self) -> Vec<f64> {
        let n = self.num_points();
        let s = DMatrix::identity(n, n);
        self.flatten(&DVector::zeros(n), &s)
    }

    pub fn flatten(&self, m: &DVector<f64>, s: &DMatrix<f64>) -> Vec<f64> {
        let n = self.num_points();
        let mut out = m.as_slice().to_vec();
        for i in 0..n {
            for j in 0..=i {
                out.push(s[(i, j)]);
            }
        }
        out
    }

    pub fn unflatten(&self, params: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.num_points();
        assert_eq!(params.len(), self.num_params(), "parameter length");
        let m = DVector::from_column_slice(&params[..n]);
        let mut s = DMatrix::zeros(n, n);
        let mut idx = n;
        for i in 0..n {
            for j in 0..=i {
                s[(i, j)] = params[idx];
                idx += 1;
            }
        }
        (m, s)
    }

    pub fn value(&self, params: &[f64]) -> f64 {
        let (m, s) = self.unflatten(params);
        self.evaluate(&m, &s).0
    }

    pub fn value_and_grad(&self, params: &[f64]) -> (f64, Vec<f64>) {
        let (m, s) = self.unflatten(params);
        let (value, gm, gs) = self.evaluate(&m, &s);
        (value, self.flatten(&gm, &gs))
    }

    fn evaluate(&self, m: &DVector<f64>, s: &DMatrix<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let n = self.num_points();
        let l = &self.chol;
        let mu = l * m;
        let a = l * s;
        let scale = std::f64::consts::SQRT_2;
        let norm = std::f64::consts::PI.sqrt();

        let mut expected = 0.0;
        let mut d_mu = DVector::zeros(n);
        let mut d_sd = DVector::zeros(n);
        for i in 0..n {
            let sd = a.row(i).norm();
            let sign = self.signs[i];
            let (mut e, mut dm, mut ds) = (0.0, 0.0, 0.0);
            for (t, w) in self.quadrature.nodes.iter().zip(&self.quadrature.weights) {
                let z = sign * (mu[i] + scale * sd * t);
                let (lc, grad) = normal::log_cdf_with_grad(z);
                let g = sign * grad;
                e += w * lc;
                dm += w * g;
                ds += w * g * scale * t;
            }
            expected += e / norm;
            d_mu[i] = dm / norm;
            d_sd[i] = ds / norm;
        }

        let mut log_diag = 0.0;
        for i in 0..n {
            log_diag += s[(i, i)].abs().ln();
        }
        let kl = 0.5 * (s.norm_squared() + m.norm_squared() - n as f64) - log_diag;

        let gm = l.tr_mul(&d_mu) - m;
        // d sd_i / d A_ij = A_ij / sd_i, and A = L S.
        let mut weighted = a;
        for i in 0..n {
            let sd = weighted.row(i).norm();
            let factor = if sd > 0.0 { d_sd[i] / sd } else { 0.0 };
            weighted.row_mut(i).scale_mut(factor);
        }
        let mut gs = l.transpose() * &weighted - s;
        for i in 0..n {
            gs[(i, i)] += 1.0 / s[(i, i)];
            for j in i + 1..n {
                gs[(i, j)] = 0.0;
            }
        }
        (expected - kl, gm, gs)
    }
}

/// Latent predictive summary at a batch of inputs.
struct Latent {
    /// `L_K^{-1} K(train, inputs)`.
    whitened: DMatrix<f64>,
    /// `S^T` times `whitened`.
    spread: DMatrix<f64>,
    mean: DVector<f64>,
    var: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GpProbitClassifier {
    cfg: GpConfig,
    inputs: Vec<Vec<f64>>,
    chol_inv: DMatrix<f64>,
    mean: DVector<f64>,
    factor: DMatrix<f64>,
    elbo_initial: f64,
    elbo_final: f64,
}

impl GpProbitClassifier {
    /// Fits the variational posterior by full-batch gradient ascent with
    /// momentum, starting from the prior. An empty training set yields the
    /// prior itself.
    pub fn fit(train: &LabeledSet, cfg: &GpConfig) -> Result<Self> {
        if let Some(&bad) = train.labels.iter().find(|&&y| y > 1) {
            return Err(Error::InvalidArgument(format!("probit GP label {bad} is not binary")));
        }
        let objective = ElboObjective::new(train, cfg)?;
        let mut params = objective.initial_params();
        let mut velocity = vec![0.0; params.len()];
        let elbo_initial = objective.value(&params);
        for step in 0..cfg.steps {
            let (value, grad) = objective.value_and_grad(&params);
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { step });
            }
            for ((p, v), g) in params.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v + g;
                *p += cfg.learning_rate * *v;
            }
        }
        let elbo_final = objective.value(&params);
        if !elbo_final.is_finite() {
            return Err(Error::Diverged { step: cfg.steps });
        }
        let (mean, factor) = objective.unflatten(&params);
        Ok(Self {
            cfg: cfg.clone(),
            inputs: train.inputs.clone(),
            chol_inv: lower_inverse(&objective.chol)?,
            mean,
            factor,
            elbo_initial,
            elbo_final,
        })
    }

    pub fn config(&self) -> &GpConfig {
        &self.cfg
    }

    /// ELBO before and after optimization.
    pub fn elbo_trace(&self) -> (f64, f64) {
        (self.elbo_initial, self.elbo_final)
    }

    fn latent(&self, inputs: &[Vec<f64>]) -> Result<Latent> {
        let cross = self.cfg.cross(&self.inputs, inputs);
        let whitened = &self.chol_inv * cross;
        let spread = self.factor.transpose() * &whitened;
        let mean = whitened.tr_mul(&self.mean);
        let var = (0..inputs.len())
            .map(|j| {
                let v = self.cfg.amplitude - whitened.column(j).norm_squared() + spread.column(j).norm_squared();
                v.max(0.0)
            })
            .collect();
        Ok(Latent { whitened, spread, mean, var })
    }

    /// Latent predictive mean and variance at each input.
    pub fn latent_moments(&self, inputs: &[Vec<f64>]) -> Result<Vec<(f64, f64)>> {
        let lat = self.latent(inputs)?;
        Ok(lat.mean.iter().copied().zip(lat.var).collect())
    }

    /// Exact `p(y = 1 | x)` under the Gaussian latent predictive.
    pub fn predict_proba(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
        Ok(self
            .latent_moments(inputs)?
            .into_iter()
            .map(|(mu, var)| normal::cdf(mu / (1.0 + var).sqrt()))
            .collect())
    }

    fn posterior_cov(&self, a: &[Vec<f64>], la: &Latent, b: &[Vec<f64>], lb: &Latent) -> DMatrix<f64> {
        let mut cov = self.cfg.cross(a, b);
        cov -= la.whitened.transpose() * &lb.whitened;
        cov += la.spread.transpose() * &lb.spread;
        cov
    }
}

/// Posterior draws of the latent function.
///
/// Draws are exact jointly over the anchors. Any other input `x` receives
/// `f(x) = mu(x) + c_x^T z + r_x eps`, its exact conditional given the anchor
/// values with one residual normal `eps` shared by all non-anchor inputs of a
/// draw. Candidate-anchor joints are therefore exact, while joints between
/// two non-anchor inputs are not modelled.
pub struct GpSampler<'a> {
    model: &'a GpProbitClassifier,
    anchors: Vec<Vec<f64>>,
    anchor_latent: Latent,
    anchor_chol_inv: DMatrix<f64>,
    z: DMatrix<f64>,
    eps: Vec<f64>,
    tensors: Vec<PredSampleTensor>,
}

impl<'a> GpSampler<'a> {
    fn new(model: &'a GpProbitClassifier, anchors: &[Vec<f64>], k: usize, seed: u64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("need at least one posterior sample".into()));
        }
        let (unique, slots) = dedupe(anchors);
        let anchor_latent = model.latent(&unique)?;
        let cov = model.posterior_cov(&unique, &anchor_latent, &unique, &anchor_latent);
        let anchor_chol = if unique.is_empty() {
            DMatrix::zeros(0, 0)
        } else {
            jittered_cholesky(&cov, model.cfg.amplitude)?
        };
        let mut rng = rng_from(seed);
        let z = DMatrix::from_fn(unique.len(), k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eps = (0..k).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();

        let f = &anchor_chol * &z;
        let unique_tensors: Vec<PredSampleTensor> = (0..unique.len())
            .map(|i| {
                let p1: Vec<f64> = (0..k).map(|j| normal::cdf(anchor_latent.mean[i] + f[(i, j)])).collect();
                PredSampleTensor::from_binary(&p1)
            })
            .collect();
        let tensors = slots.iter().map(|&s| unique_tensors[s].clone()).collect();
        Ok(Self {
            model,
            anchors: unique,
            anchor_latent,
            anchor_chol_inv: lower_inverse(&anchor_chol)?,
            z,
            eps,
            tensors,
        })
    }
}

impl PosteriorSampler for GpSampler<'_> {
    fn anchor_tensors(&self) -> &[PredSampleTensor] {
        &self.tensors
    }

    fn sample(&self, inputs: &[Vec<f64>]) -> Result<Vec<PredSampleTensor>> {
        let k = self.eps.len();
        let lat = self.model.latent(inputs)?;
        let mut resid = lat.var.clone();
        let mut shift = DMatrix::zeros(inputs.len(), k);
        if !self.anchors.is_empty() {
            let cross = self.model.posterior_cov(&self.anchors, &self.anchor_latent, inputs, &lat);
            let c = &self.anchor_chol_inv * cross;
            for (j, r) in resid.iter_mut().enumerate() {
                *r -= c.column(j).norm_squared();
            }
            shift = c.transpose() * &self.z;
        }
        Ok((0..inputs.len())
            .map(|b| {
                let r = resid[b].max(0.0).sqrt();
                let p1: Vec<f64> = (0..k)
                    .map(|j| normal::cdf(lat.mean[b] + shift[(b, j)] + r * self.eps[j]))
                    .collect();
                PredSampleTensor::from_binary(&p1)
            })
            .collect())
    }
}

impl StochasticClassifier for GpProbitClassifier {
    fn num_classes(&self) -> usize {
        2
    }

    fn default_samples(&self) -> usize {
        DEFAULT_SAMPLES
    }

    fn posterior_sampler<'a>(&'a self, anchors: &[Vec<f64>], k: usize, seed: u64) -> Result<Box<dyn PosteriorSampler + 'a>> {
        Ok(Box::new(GpSampler::new(self, anchors, k, seed)?))
    }

    fn predict_marginal(&self, inputs: &[Vec<f64>], _seed: u64) -> Result<Vec<ProbVector>> {
        Ok(self
            .predict_proba(inputs)?
            .into_iter()
            .map(ProbVector::from_binary)
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::marginal_from_samples;
    use rand::Rng;

    fn quick(steps: usize) -> GpConfig {
        GpConfig {
            steps,
            ..GpConfig::default()
        }
    }

    fn toy() -> LabeledSet {
        LabeledSet::new(vec![vec![-3.0, 0.0], vec![3.0, 0.0]], vec![0, 1], 2).unwrap()
    }

    /// `p(y = 1 | x_i, data)` by brute-force integration over the two latent
    /// values on a grid; the far-apart points are nearly independent.
    fn grid_posterior(train: &LabeledSet, cfg: &GpConfig) -> [f64; 2] {
        let a = cfg.amplitude;
        let c = cfg.kernel(&train.inputs[0], &train.inputs[1]);
        let det = a * a - c * c;
        let sign = [-1.0, 1.0];
        let (mut z, mut m0, mut m1) = (0.0, 0.0, 0.0);
        let h = 0.05;
        for i in -400..=400 {
            for j in -400..=400 {
                let (f0, f1) = (i as f64 * h, j as f64 * h);
                let quad = (a * f0 * f0 - 2.0 * c * f0 * f1 + a * f1 * f1) / det;
                let w = (-0.5 * quad).exp() * normal::cdf(sign[0] * f0) * normal::cdf(sign[1] * f1);
                z += w;
                m0 += w * normal::cdf(f0);
                m1 += w * normal::cdf(f1);
            }
        }
        [m0 / z, m1 / z]
    }

    #[test]
    fn opposite_labels_land_on_the_correct_side() {
        let train = toy();
        let cfg = quick(2000);
        let model = GpProbitClassifier::fit(&train, &cfg).unwrap();
        let p = model.predict_proba(&train.inputs).unwrap();
        let oracle = grid_posterior(&train, &cfg);
        assert!(p[0] < 0.5 && oracle[0] < 0.5, "{p:?} {oracle:?}");
        assert!(p[1] > 0.5 && oracle[1] > 0.5, "{p:?} {oracle:?}");
        assert!((p[1] - oracle[1]).abs() < 0.05, "{p:?} {oracle:?}");
    }

    #[test]
    fn single_positive_point_tilts_up() {
        let train = LabeledSet::new(vec![vec![0.0, 0.0]], vec![1], 2).unwrap();
        let model = GpProbitClassifier::fit(&train, &quick(500)).unwrap();
        assert!(model.predict_proba(&train.inputs).unwrap()[0] > 0.5);
    }

    #[test]
    fn elbo_does_not_decrease() {
        let model = GpProbitClassifier::fit(&toy(), &quick(1000)).unwrap();
        let (start, end) = model.elbo_trace();
        assert!(end >= start, "{start} -> {end}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rng_from(11);
        let inputs: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let labels = (0..6).map(|i| i % 2).collect();
        let train = LabeledSet::new(inputs, labels, 2).unwrap();
        let obj = ElboObjective::new(&train, &GpConfig::default()).unwrap();
        for _ in 0..5 {
            let mut params = obj.initial_params();
            for p in &mut params {
                *p += rng.random_range(-0.5..0.5);
            }
            let (_, grad) = obj.value_and_grad(&params);
            let h = 1e-5;
            let fd: Vec<f64> = (0..params.len())
                .map(|i| {
                    let mut up = params.clone();
                    let mut down = params.clone();
                    up[i] += h;
                    down[i] -= h;
                    (obj.value(&up) - obj.value(&down)) / (2.0 * h)
                })
                .collect();
            let diff: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let scale: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(diff / scale < 1e-4, "relative error {}", diff / scale);
        }
    }

    #[test]
    fn empty_training_set_is_the_prior() {
        let model = GpProbitClassifier::fit(&LabeledSet::empty(2), &quick(10)).unwrap();
        let moments = model.latent_moments(&[vec![0.3, -1.0]]).unwrap();
        assert_eq!(moments[0].0, 0.0);
        assert!((moments[0].1 - 10.0).abs() < 1e-9);
    }

    #[test]
    fn identical_inputs_share_rows() {
        let model = GpProbitClassifier::fit(&toy(), &quick(200)).unwrap();
        let x = vec![0.5, 0.5];
        let t = model.predict_samples(&[x.clone(), x.clone()], 1, 3).unwrap();
        assert_eq!(t[0], t[1]);
        let sampler = model.posterior_sampler(&[vec![1.0, 1.0]], 4, 3).unwrap();
        let again = sampler.sample(&[x.clone(), x]).unwrap();
        assert_eq!(again[0], again[1]);
    }

    #[test]
    fn sample_mean_tracks_the_predictive() {
        let train = toy();
        let model = GpProbitClassifier::fit(&train, &quick(2000)).unwrap();
        let exact = model.predict_proba(&train.inputs).unwrap();
        let t = model.predict_samples(&train.inputs, 5000, 1).unwrap();
        for (tensor, p) in t.iter().zip(&exact) {
            assert!((marginal_from_samples(tensor).probs()[1] - p).abs() < 0.05);
        }
    }

    #[test]
    fn distant_inputs_revert_to_the_prior() {
        let model = GpProbitClassifier::fit(&toy(), &quick(500)).unwrap();
        let far = vec![40.0, 40.0];
        let k = 4000;
        let t = &model.predict_samples(&[far], k, 9).unwrap()[0];
        let p1: Vec<f64> = t.rows().map(|r| r[1]).collect();
        let mean = p1.iter().sum::<f64>() / k as f64;
        let var = p1.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (k - 1) as f64;
        assert!((mean - 0.5).abs() < 3.0 * (var / k as f64).sqrt(), "{mean}");
    }

    #[test]
    fn conditional_samples_match_joint_samples() {
        let model = GpProbitClassifier::fit(&toy(), &quick(300)).unwrap();
        let target = vec![vec![0.2, 0.1]];
        let x = vec![0.6, -0.2];
        let sampler = model.posterior_sampler(&target, 8, 5).unwrap();
        let via_anchor = sampler.sample(&target).unwrap();
        for (a, b) in via_anchor[0].data().iter().zip(sampler.anchor_tensors()[0].data()) {
            assert!((a - b).abs() < 1e-3);
        }
        let chunked = sampler.sample(std::slice::from_ref(&x)).unwrap();
        let batched = sampler.sample(&[vec![5.0, 5.0], x]).unwrap();
        for (a, b) in chunked[0].data().iter().zip(batched[1].data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
