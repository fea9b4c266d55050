//! Fully connected rectifier network with dropout on hidden activations.
//!
//! Posterior draw `i` is one dropout mask over the hidden units, shared by
//! every input evaluated with it.

use nalgebra::{DMatrix, RowDVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{PointwiseSampler, PosteriorSampler, StochasticClassifier};
use crate::data::LabeledSet;
use crate::error::{Error, Result};
use crate::prob::{PredSampleTensor, ProbVector};
use crate::seed::{derive, rng_from};

pub const DEFAULT_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub l2: f64,
    pub learning_rate: f64,
    pub max_steps: usize,
    /// Training stops once validation NLL has not improved for this many
    /// consecutive steps.
    pub patience: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![128, 128, 128],
            dropout: 0.1,
            l2: 1e-4,
            learning_rate: 0.05,
            max_steps: 20_000,
            patience: 10_000,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            problems.push("mlp hidden widths must be non-empty and positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            problems.push(format!("mlp dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            problems.push(format!("mlp l2 must be non-negative, got {}", self.l2));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            problems.push(format!("mlp learning_rate must be positive, got {}", self.learning_rate));
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    w: DMatrix<f64>,
    b: RowDVector<f64>,
}

/// Per-hidden-layer unit scales: `0` for dropped units, `1 / (1 - rate)`
/// for kept ones. One row per input, or a single shared row.
pub type Masks = Vec<DMatrix<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMlp {
    layers: Vec<Layer>,
    dropout: f64,
    l2: f64,
    num_classes: usize,
}

fn design(inputs: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(inputs.len(), dim, |i, j| inputs[i][j])
}

fn softmax_rows(logits: &mut DMatrix<f64>) {
    for mut row in logits.row_iter_mut() {
        let max = row.max();
        row.apply(|v| *v = (*v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

impl DropoutMlp {
    /// He-initialized network.
    pub fn init(dim: usize, num_classes: usize, cfg: &MlpConfig, seed: u64) -> Self {
        let mut rng = rng_from(seed);
        let mut widths = vec![dim];
        widths.extend(&cfg.hidden);
        widths.push(num_classes);
        let layers = widths
            .windows(2)
            .map(|w| {
                let std = (2.0 / w[0] as f64).sqrt();
                Layer {
                    w: DMatrix::from_fn(w[0], w[1], |_, _| std * rng.sample::<f64, _>(StandardNormal)),
                    b: RowDVector::zeros(w[1]),
                }
            })
            .collect();
        Self {
            layers,
            dropout: cfg.dropout,
            l2: cfg.l2,
            num_classes,
        }
    }

    /// Full-batch gradient descent with a fresh per-example dropout mask each
    /// step; returns the parameters with the lowest validation NLL seen.
    pub fn fit(train: &LabeledSet, validation: &LabeledSet, cfg: &MlpConfig, seed: u64) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("network training set"));
        }
        if validation.is_empty() {
            return Err(Error::Empty("network validation set"));
        }
        let mut model = Self::init(train.dim(), train.num_classes, cfg, derive(seed, 0));
        let mut rng = rng_from(derive(seed, 1));
        let x = design(&train.inputs, train.dim());
        let xv = design(&validation.inputs, validation.dim());
        let mut best = model.clone();
        let mut best_nll = model.nll(&xv, &validation.labels, None);
        let mut stale = 0;
        for step in 0..cfg.max_steps {
            if stale >= cfg.patience {
                break;
            }
            let masks = model.draw_masks(train.len(), &mut rng);
            let (loss, grad) = model.loss_and_grad(&x, &train.labels, Some(&masks));
            if !loss.is_finite() {
                return Err(Error::Diverged { step });
            }
            let mut params = model.params();
            for (p, g) in params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
            model.set_params(&params);
            let nll = model.nll(&xv, &validation.labels, None);
            if !nll.is_finite() {
                return Err(Error::Diverged { step });
            }
            if nll < best_nll {
                best_nll = nll;
                best = model.clone();
                stale = 0;
            } else {
                stale += 1;
            }
        }
        Ok(best)
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend(l.w.iter());
            out.extend(l.b.iter());
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) {
        assert_eq!(params.len(), self.num_params(), "parameter length");
        let mut at = 0;
        for l in &mut self.layers {
            let n = l.w.len();
            l.w.as_mut_slice().copy_from_slice(&params[at..at + n]);
            at += n;
            let n = l.b.len();
            l.b.as_mut_slice().copy_from_slice(&params[at..at + n]);
            at += n;
        }
    }

    fn mask(&self, rows: usize, width: usize, rng: &mut impl Rng) -> DMatrix<f64> {
        let keep = 1.0 - self.dropout;
        DMatrix::from_fn(rows, width, |_, _| {
            if self.dropout == 0.0 || rng.random::<f64>() < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
    }

    /// Independent masks for `rows` inputs.
    pub fn draw_masks(&self, rows: usize, rng: &mut impl Rng) -> Masks {
        self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| self.mask(rows, l.w.ncols(), rng))
            .collect()
    }

    /// Hidden pre-activations and masked activations, then output logits.
    fn forward(&self, x: &DMatrix<f64>, masks: Option<&Masks>) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, DMatrix<f64>) {
        let mut pre = Vec::new();
        let mut acts = Vec::new();
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let mut z = &h * &l.w;
            for mut row in z.row_iter_mut() {
                row += &l.b;
            }
            if i == last {
                return (pre, acts, z);
            }
            let mut a = z.map(|v| v.max(0.0));
            if let Some(m) = masks {
                let m = &m[i];
                if m.nrows() == 1 {
                    for mut row in a.row_iter_mut() {
                        row.component_mul_assign(&m.row(0));
                    }
                } else {
                    a.component_mul_assign(m);
                }
            }
            pre.push(z);
            acts.push(a.clone());
            h = a;
        }
        unreachable!("network has an output layer")
    }

    fn nll(&self, x: &DMatrix<f64>, labels: &[usize], masks: Option<&Masks>) -> f64 {
        let (_, _, mut logits) = self.forward(x, masks);
        softmax_rows(&mut logits);
        -labels
            .iter()
            .enumerate()
            .map(|(i, &y)| logits[(i, y)].max(f64::MIN_POSITIVE).ln())
            .sum::<f64>()
            / labels.len() as f64
    }

    /// Mean training NLL plus the l2 penalty on weight matrices.
    pub fn loss(&self, inputs: &[Vec<f64>], labels: &[usize], masks: Option<&Masks>) -> f64 {
        let x = design(inputs, inputs.first().map_or(0, Vec::len));
        self.nll(&x, labels, masks) + self.penalty()
    }

    fn penalty(&self) -> f64 {
        self.l2 * self.layers.iter().map(|l| l.w.norm_squared()).sum::<f64>()
    }

    /// Loss and its gradient by backpropagation, flattened like
    /// [`DropoutMlp::params`].
    pub fn loss_and_grad_at(&self, inputs: &[Vec<f64>], labels: &[usize], masks: Option<&Masks>) -> (f64, Vec<f64>) {
        let x = design(inputs, inputs.first().map_or(0, Vec::len));
        self.loss_and_grad(&x, labels, masks)
    }

    fn loss_and_grad(&self, x: &DMatrix<f64>, labels: &[usize], masks: Option<&Masks>) -> (f64, Vec<f64>) {
        let n = labels.len() as f64;
        let (pre, acts, mut probs) = self.forward(x, masks);
        softmax_rows(&mut probs);
        let mut nll = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            nll -= probs[(i, y)].max(f64::MIN_POSITIVE).ln();
            probs[(i, y)] -= 1.0;
        }
        let mut delta = probs / n;
        let mut grads: Vec<(DMatrix<f64>, RowDVector<f64>)> = Vec::with_capacity(self.layers.len());
        for i in (0..self.layers.len()).rev() {
            let input = if i == 0 { x } else { &acts[i - 1] };
            let gw = input.transpose() * &delta + &self.layers[i].w * (2.0 * self.l2);
            let gb = delta.row_sum();
            if i > 0 {
                let mut back = &delta * self.layers[i].w.transpose();
                let z = &pre[i - 1];
                let m = masks.map(|m| &m[i - 1]);
                for r in 0..back.nrows() {
                    for c in 0..back.ncols() {
                        let scale = m.map_or(1.0, |m| if m.nrows() == 1 { m[(0, c)] } else { m[(r, c)] });
                        back[(r, c)] *= if z[(r, c)] > 0.0 { scale } else { 0.0 };
                    }
                }
                delta = back;
            }
            grads.push((gw, gb));
        }
        grads.reverse();
        let mut flat = Vec::with_capacity(self.num_params());
        for (gw, gb) in grads {
            flat.extend(gw.iter());
            flat.extend(gb.iter());
        }
        (nll / n + self.penalty(), flat)
    }

    /// Class probabilities with one mask row shared by all inputs.
    fn probs_with(&self, x: &DMatrix<f64>, masks: Option<&Masks>) -> DMatrix<f64> {
        let (_, _, mut logits) = self.forward(x, masks);
        softmax_rows(&mut logits);
        logits
    }

    /// Mask for posterior draw `i` under `seed`.
    fn draw_mask(&self, seed: u64, i: usize) -> Masks {
        let mut rng = rng_from(derive(seed, i as u64));
        self.draw_masks(1, &mut rng)
    }

    fn tensors(&self, masks: &[Masks], inputs: &[Vec<f64>]) -> Vec<PredSampleTensor> {
        let c = self.num_classes;
        let k = masks.len();
        let x = design(inputs, self.layers[0].w.nrows());
        let mut data = vec![vec![0.0; k * c]; inputs.len()];
        for (j, m) in masks.iter().enumerate() {
            let p = self.probs_with(&x, Some(m));
            for (i, row) in data.iter_mut().enumerate() {
                for y in 0..c {
                    row[j * c + y] = p[(i, y)];
                }
            }
        }
        data.into_iter().map(|d| PredSampleTensor::from_raw(k, c, d)).collect()
    }

    /// Predictive without sampling, using the expected mask.
    pub fn predict_deterministic(&self, inputs: &[Vec<f64>]) -> Vec<ProbVector> {
        let x = design(inputs, self.layers[0].w.nrows());
        let p = self.probs_with(&x, None);
        p.row_iter()
            .map(|r| ProbVector::normalized(r.iter().copied().collect()).expect("softmax output is a distribution"))
            .collect()
    }
}

impl StochasticClassifier for DropoutMlp {
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
        let masks: Vec<Masks> = (0..k).map(|i| self.draw_mask(seed, i)).collect();
        Ok(Box::new(PointwiseSampler::new(anchors, move |xs: &[Vec<f64>]| {
            Ok(self.tensors(&masks, xs))
        })?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::bald_categorical;

    fn small() -> MlpConfig {
        MlpConfig {
            hidden: vec![16, 16, 16],
            learning_rate: 0.1,
            max_steps: 600,
            patience: 600,
            ..MlpConfig::default()
        }
    }

    fn separable(n: usize, seed: u64) -> LabeledSet {
        let mut rng = rng_from(seed);
        let inputs: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)])
            .collect();
        let labels = inputs.iter().map(|x| usize::from(x[0] + 0.5 * x[1] > 0.0)).collect();
        LabeledSet::new(inputs, labels, 2).unwrap()
    }

    #[test]
    fn learns_a_separable_problem() {
        let train = separable(80, 1);
        let val = separable(20, 2);
        let model = DropoutMlp::fit(&train, &val, &small(), 3).unwrap();
        let preds = model.predict_deterministic(&train.inputs);
        let correct = preds.iter().zip(&train.labels).filter(|(p, &y)| p.argmax() == y).count();
        assert!(correct as f64 / train.len() as f64 >= 0.95, "{correct}");
    }

    #[test]
    fn backprop_matches_finite_differences() {
        let train = separable(7, 4);
        let model = DropoutMlp::init(2, 2, &MlpConfig { hidden: vec![5, 4, 3], ..small() }, 5);
        let masks = model.draw_masks(train.len(), &mut rng_from(6));
        let params = model.params();
        let (_, grad) = model.loss_and_grad_at(&train.inputs, &train.labels, Some(&masks));
        let h = 1e-6;
        let mut probe = model.clone();
        let fd: Vec<f64> = (0..params.len())
            .map(|i| {
                let mut p = params.clone();
                p[i] += h;
                probe.set_params(&p);
                let up = probe.loss(&train.inputs, &train.labels, Some(&masks));
                p[i] -= 2.0 * h;
                probe.set_params(&p);
                let down = probe.loss(&train.inputs, &train.labels, Some(&masks));
                (up - down) / (2.0 * h)
            })
            .collect();
        let diff: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = fd.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-4, "{}", diff / norm);
    }

    #[test]
    fn zero_patience_keeps_the_initial_network() {
        let cfg = MlpConfig { patience: 0, ..small() };
        let train = separable(10, 1);
        let model = DropoutMlp::fit(&train, &train, &cfg, 8).unwrap();
        assert_eq!(model, DropoutMlp::init(2, 2, &cfg, derive(8, 0)));
    }

    #[test]
    fn no_dropout_means_identical_rows() {
        let cfg = MlpConfig { dropout: 0.0, ..small() };
        let model = DropoutMlp::init(2, 3, &cfg, 1);
        let t = &model.predict_samples(&[vec![0.3, 0.1]], 10, 2).unwrap()[0];
        assert!(t.rows().all(|r| r == t.row(0)));
    }

    #[test]
    fn sampling_is_reproducible_and_aligned() {
        let model = DropoutMlp::init(2, 3, &small(), 1);
        let x = vec![vec![0.3, 0.1], vec![0.3, 0.1]];
        let a = model.predict_samples(&x, 10, 2).unwrap();
        let b = model.predict_samples(&x, 10, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[0], a[1]);
    }

    #[test]
    fn heavy_dropout_creates_disagreement() {
        let cfg = MlpConfig {
            hidden: vec![256, 256, 256],
            dropout: 0.5,
            ..small()
        };
        let model = DropoutMlp::init(2, 2, &cfg, 3);
        let t = &model.predict_samples(&[vec![1.5, -0.7]], 50, 4).unwrap()[0];
        assert!(bald_categorical(t) > 0.0);
    }
}
