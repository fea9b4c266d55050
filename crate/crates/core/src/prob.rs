//! Categorical probability primitives shared by every estimator.
//!
//! All quantities are in nats. Probabilities inside logarithms are clamped to
//! [`LOG_FLOOR`] so that finite-sample zeros never produce `-inf`.

use crate::error::{Error, Result};

/// Floor applied to probabilities before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

/// Tolerance for the sum-to-one check.
pub const SUM_TOL: f64 = 1e-9;

#[inline]
pub(crate) fn clamped_ln(p: f64) -> f64 {
    p.max(LOG_FLOOR).ln()
}

/// `p ln p` with the `0 ln 0 = 0` convention.
#[inline]
pub(crate) fn xlogx(p: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else {
        p * clamped_ln(p)
    }
}

fn check_probs(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::InvalidDistribution("no classes".into()));
    }
    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {bad} is negative or not finite")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidDistribution(format!("entries sum to {total}")));
    }
    Ok(())
}

/// A normalized categorical distribution over `C` classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector(Vec<f64>);

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs)?;
        Ok(Self(probs))
    }

    /// Rescales non-negative weights to sum to one.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidDistribution(format!("cannot normalize weights summing to {total}")));
        }
        Ok(Self(weights.into_iter().map(|w| w / total).collect()))
    }

    pub fn uniform(classes: usize) -> Self {
        Self(vec![1.0 / classes as f64; classes])
    }

    pub fn one_hot(classes: usize, class: usize) -> Self {
        let mut probs = vec![0.0; classes];
        probs[class] = 1.0;
        Self(probs)
    }

    /// `(1 - p, p)`, with `p` clamped into `[0, 1]`.
    pub fn from_binary(p: f64) -> Self {
        let p = p.clamp(0.0, 1.0);
        Self(vec![1.0 - p, p])
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Index of the largest entry; ties go to the lowest class index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (c, p) in self.0.iter().enumerate() {
            if *p > self.0[best] {
                best = c;
            }
        }
        best
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.0)
    }
}

/// Shannon entropy of a probability slice in nats.
pub fn entropy(probs: &[f64]) -> f64 {
    -probs.iter().map(|p| xlogx(*p)).sum::<f64>()
}

/// Joint distribution over `(y, y*)`; rows index `y`, columns index `y*`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProbMatrix {
    rows: usize,
    cols: usize,
    probs: Vec<f64>,
}

impl JointProbMatrix {
    /// Builds a joint from row-major entries.
    pub fn new(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != rows * cols {
            return Err(Error::InvalidDistribution(format!(
                "{} entries for a {rows}x{cols} joint",
                probs.len()
            )));
        }
        check_probs(&probs)?;
        Ok(Self { rows, cols, probs })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::InvalidDistribution("ragged joint matrix".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn outer(a: &ProbVector, b: &ProbVector) -> Self {
        let probs = a
            .probs()
            .iter()
            .flat_map(|pa| b.probs().iter().map(move |pb| pa * pb))
            .collect();
        Self { rows: a.num_classes(), cols: b.num_classes(), probs }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probs[row * self.cols + col]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row_marginal(&self) -> ProbVector {
        ProbVector(self.probs.chunks(self.cols).map(|r| r.iter().sum()).collect())
    }

    pub fn col_marginal(&self) -> ProbVector {
        let mut out = vec![0.0; self.cols];
        for row in self.probs.chunks(self.cols) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        ProbVector(out)
    }

    pub fn transpose(&self) -> Self {
        let mut probs = vec![0.0; self.probs.len()];
        for r in 0..self.rows {
            for c in 0..self.cols {
                probs[c * self.rows + r] = self.get(r, c);
            }
        }
        Self { rows: self.cols, cols: self.rows, probs }
    }
}

/// `K` posterior-sample predictive distributions for one input; row `i` is
/// `p(y | x, theta_i)`. Rows of tensors from one sampling call share the same
/// `theta_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct PredSampleTensor {
    k: usize,
    classes: usize,
    data: Vec<f64>,
}

impl PredSampleTensor {
    /// Builds a tensor from row-major `K x C` entries, validating each row.
    pub fn new(k: usize, classes: usize, data: Vec<f64>) -> Result<Self> {
        if k == 0 || classes == 0 {
            return Err(Error::Empty("posterior sample tensor"));
        }
        if data.len() != k * classes {
            return Err(Error::InvalidDistribution(format!(
                "{} entries for a {k}x{classes} tensor",
                data.len()
            )));
        }
        for row in data.chunks(classes) {
            check_probs(row)?;
        }
        Ok(Self { k, classes, data })
    }

    /// Skips validation; callers guarantee each row is a distribution.
    pub(crate) fn from_raw(k: usize, classes: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), k * classes);
        Self { k, classes, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let classes = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::InvalidDistribution("ragged tensor rows".into()));
        }
        Self::new(rows.len(), classes, rows.concat())
    }

    /// Binary tensor from `p(y = 1 | x, theta_i)` values.
    pub fn from_binary(p1: &[f64]) -> Self {
        let data = p1.iter().flat_map(|p| [1.0 - p, *p]).collect();
        Self { k: p1.len(), classes: 2, data }
    }

    pub fn num_samples(&self) -> usize {
        self.k
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.classes..(i + 1) * self.classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.classes)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn marginal(&self) -> ProbVector {
        marginal_from_samples(self)
    }
}

/// Monte Carlo marginal predictive: the column means of the tensor.
pub fn marginal_from_samples(t: &PredSampleTensor) -> ProbVector {
    let mut out = vec![0.0; t.classes];
    for row in t.rows() {
        for (o, p) in out.iter_mut().zip(row) {
            *o += p;
        }
    }
    let k = t.k as f64;
    out.iter_mut().for_each(|o| *o /= k);
    ProbVector(out)
}

/// Monte Carlo joint predictive of two inputs under shared posterior draws:
/// the average over `i` of the outer products of row `i` of each tensor.
pub fn joint_from_samples(t_x: &PredSampleTensor, t_xstar: &PredSampleTensor) -> Result<JointProbMatrix> {
    if t_x.k != t_xstar.k {
        return Err(Error::Alignment { expected: t_x.k, found: t_xstar.k });
    }
    let (cx, cs) = (t_x.classes, t_xstar.classes);
    let mut probs = vec![0.0; cx * cs];
    for (a, b) in t_x.rows().zip(t_xstar.rows()) {
        for (r, pa) in a.iter().enumerate() {
            let out = &mut probs[r * cs..(r + 1) * cs];
            for (o, pb) in out.iter_mut().zip(b) {
                *o += pa * pb;
            }
        }
    }
    let k = t_x.k as f64;
    probs.iter_mut().for_each(|p| *p /= k);
    Ok(JointProbMatrix { rows: cx, cols: cs, probs })
}

/// `sum p(y, y*) log(p(y, y*) / (q_y(y) q_ystar(y*)))`.
///
/// Fails when `p` puts mass (above the floor) on a cell whose reference
/// product is below [`LOG_FLOOR`].
pub fn kl_divergence(p: &JointProbMatrix, q_y: &ProbVector, q_ystar: &ProbVector) -> Result<f64> {
    if q_y.num_classes() != p.rows || q_ystar.num_classes() != p.cols {
        return Err(Error::InvalidDistribution(format!(
            "reference marginals of sizes {}x{} for a {}x{} joint",
            q_y.num_classes(),
            q_ystar.num_classes(),
            p.rows,
            p.cols
        )));
    }
    let mut total = 0.0;
    for (r, qr) in q_y.probs().iter().enumerate() {
        for (c, qc) in q_ystar.probs().iter().enumerate() {
            let pij = p.get(r, c);
            if pij <= 0.0 {
                continue;
            }
            let q = qr * qc;
            if q < LOG_FLOOR && pij > LOG_FLOOR {
                return Err(Error::DegenerateSupport { row: r, col: c });
            }
            total += pij * (clamped_ln(pij) - clamped_ln(q));
        }
    }
    Ok(total)
}

/// Mutual information of a joint with respect to its own marginals.
pub fn mutual_information(p: &JointProbMatrix) -> f64 {
    // Own marginals always cover the joint's support.
    kl_divergence(p, &p.row_marginal(), &p.col_marginal()).unwrap_or(0.0).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_close!(pv(&[0.5, 0.5]).entropy(), std::f64::consts::LN_2, 1e-12);
        assert_eq!(pv(&[1.0, 0.0]).entropy(), 0.0);
        assert_close!(pv(&[0.9, 0.1]).entropy(), 0.325083, 1e-6);
    }

    #[test]
    fn rejects_bad_vectors() {
        assert!(ProbVector::new(vec![0.5, 0.4]).is_err());
        assert!(ProbVector::new(vec![1.1, -0.1]).is_err());
        assert!(ProbVector::new(vec![]).is_err());
        assert!(PredSampleTensor::from_rows(&[vec![0.5, 0.5], vec![0.2, 0.2]]).is_err());
    }

    #[test]
    fn kl_examples() {
        let m = pv(&[0.5, 0.5]);
        let indep = JointProbMatrix::outer(&pv(&[0.3, 0.7]), &pv(&[0.6, 0.4]));
        let kl = kl_divergence(&indep, &indep.row_marginal(), &indep.col_marginal()).unwrap();
        assert_close!(kl, 0.0, 1e-12);

        let corr = JointProbMatrix::from_rows(&[vec![0.41, 0.09], vec![0.09, 0.41]]).unwrap();
        assert_close!(kl_divergence(&corr, &m, &m).unwrap(), 0.22175, 1e-5);

        let perfect = JointProbMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        assert_close!(kl_divergence(&perfect, &m, &m).unwrap(), std::f64::consts::LN_2, 1e-12);
    }

    #[test]
    fn kl_degenerate_support() {
        let p = JointProbMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap();
        let err = kl_divergence(&p, &pv(&[1.0, 0.0]), &pv(&[0.5, 0.5])).unwrap_err();
        assert!(matches!(err, Error::DegenerateSupport { row: 1, col: 1 }));
    }

    #[test]
    fn marginal_examples() {
        let t = PredSampleTensor::from_rows(&[vec![0.3, 0.7]]).unwrap();
        assert_eq!(marginal_from_samples(&t).probs(), &[0.3, 0.7]);
        let t = PredSampleTensor::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        assert_close!(marginal_from_samples(&t).probs()[0], 0.5, 1e-15);
        let t = PredSampleTensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let m = marginal_from_samples(&t);
        assert_close!(m.probs()[0], 2.0 / 3.0, 1e-15);
        assert_close!(m.probs()[1], 1.0 / 3.0, 1e-15);
    }

    #[test]
    fn joint_examples() {
        let a = PredSampleTensor::from_rows(&[vec![0.2, 0.8]]).unwrap();
        let b = PredSampleTensor::from_rows(&[vec![0.6, 0.1, 0.3]]).unwrap();
        let j = joint_from_samples(&a, &b).unwrap();
        assert_eq!(j.shape(), (2, 3));
        assert_close!(j.get(1, 2), 0.8 * 0.3, 1e-15);

        let t = PredSampleTensor::from_rows(&[vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap();
        let j = joint_from_samples(&t, &t).unwrap();
        for (got, want) in j.probs().iter().zip([0.41, 0.09, 0.09, 0.41]) {
            assert_close!(*got, want, 1e-12);
        }

        let u = PredSampleTensor::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let j = joint_from_samples(&t, &u).unwrap();
        let expect = JointProbMatrix::outer(&t.marginal(), &ProbVector::uniform(2));
        for (got, want) in j.probs().iter().zip(expect.probs()) {
            assert_close!(*got, *want, 1e-15);
        }
    }

    #[test]
    fn joint_alignment_error() {
        let a = PredSampleTensor::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let b = PredSampleTensor::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert!(matches!(joint_from_samples(&a, &b), Err(Error::Alignment { expected: 1, found: 2 })));
    }

    #[test]
    fn argmax_ties_lowest_index() {
        assert_eq!(pv(&[0.5, 0.5]).argmax(), 0);
        assert_eq!(pv(&[0.2, 0.4, 0.4]).argmax(), 1);
    }
}
