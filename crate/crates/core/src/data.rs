//! Datasets: the two-dimensional synthetic benchmark, class-proportion split
//! recipes, and CSV ingestion.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normal;
use crate::seed::rng_from;

/// Indexed input-label pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
}

impl LabeledSet {
    pub fn new(inputs: Vec<Vec<f64>>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if inputs.len() != labels.len() {
            return Err(Error::InvalidArgument(format!("{} inputs but {} labels", inputs.len(), labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= num_classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside [0, {num_classes})")));
        }
        Ok(Self { inputs, labels, num_classes })
    }

    pub fn empty(num_classes: usize) -> Self {
        Self { inputs: Vec::new(), labels: Vec::new(), num_classes }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    pub fn push(&mut self, input: Vec<f64>, label: usize) {
        debug_assert!(label < self.num_classes);
        self.inputs.push(input);
        self.labels.push(label);
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    pub fn class_proportions(&self) -> Vec<f64> {
        let n = self.len().max(1) as f64;
        self.class_counts().into_iter().map(|c| c as f64 / n).collect()
    }
}

/// Bivariate Student's t distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudentTInput {
    pub dof: f64,
    pub location: [f64; 2],
    /// Row-major 2x2 scale matrix.
    pub scale: [[f64; 2]; 2],
}

impl StudentTInput {
    /// `p1(x)`: the input distribution of the synthetic task.
    pub const PRIMARY: Self = Self { dof: 5.0, location: [0.0, 0.0], scale: [[0.8, 0.0], [0.0, 0.8]] };

    /// `p2(x)`: shifted and narrowed variant, used only for visualisation.
    pub const SHIFTED: Self = Self { dof: 5.0, location: [0.8, 0.9], scale: [[0.4, 0.0], [0.0, 0.4]] };

    fn cholesky(&self) -> Result<[[f64; 2]; 2]> {
        let [[a, b], [c, d]] = self.scale;
        if !(self.dof > 0.0) || (b - c).abs() > 1e-12 || a <= 0.0 || a * d - b * c <= 0.0 {
            return Err(Error::InvalidArgument(format!("invalid Student-t parameters {self:?}")));
        }
        let l00 = a.sqrt();
        let l10 = b / l00;
        Ok([[l00, 0.0], [l10, (d - l10 * l10).sqrt()]])
    }

    /// Covariance `nu / (nu - 2) * Sigma`, finite for `nu > 2`.
    pub fn covariance(&self) -> Option<[[f64; 2]; 2]> {
        (self.dof > 2.0).then(|| {
            let f = self.dof / (self.dof - 2.0);
            self.scale.map(|r| r.map(|v| f * v))
        })
    }
}

/// `n` i.i.d. draws as `mu + L z / sqrt(g / nu)` with `z` standard normal and
/// `g` chi-square with `nu` degrees of freedom.
pub fn sample_student_t(dist: &StudentTInput, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let l = dist.cholesky()?;
    let chi = ChiSquared::new(dist.dof).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = rng_from(seed);
    Ok((0..n)
        .map(|_| {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            let scale = (chi.sample(&mut rng) / dist.dof).sqrt().recip();
            vec![
                dist.location[0] + scale * l[0][0] * z0,
                dist.location[1] + scale * (l[1][0] * z0 + l[1][1] * z1),
            ]
        })
        .collect())
}

/// `p(y = 1 | x) = Phi(20 (tanh(2 x_1) - x_2))`.
pub fn true_label_prob(x: &[f64]) -> f64 {
    normal::cdf(20.0 * ((2.0 * x[0]).tanh() - x[1]))
}

/// Draws binary labels from [`true_label_prob`].
pub fn sample_labels(inputs: Vec<Vec<f64>>, seed: u64) -> LabeledSet {
    let mut rng = rng_from(seed);
    let labels = inputs
        .iter()
        .map(|x| usize::from(rng.random::<f64>() < true_label_prob(x)))
        .collect();
    LabeledSet { inputs, labels, num_classes: 2 }
}

/// Isotropic Gaussian clusters with means evenly spaced on a circle in the
/// first two coordinates; classes are equally likely.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlobSpec {
    pub classes: usize,
    pub dim: usize,
    pub radius: f64,
    pub noise: f64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        Self { classes: 10, dim: 2, radius: 3.0, noise: 0.6 }
    }
}

impl BlobSpec {
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        if self.classes < 2 {
            problems.push(format!("blobs need at least 2 classes, got {}", self.classes));
        }
        if self.dim < 2 {
            problems.push(format!("blobs need at least 2 dimensions, got {}", self.dim));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) || !self.radius.is_finite() {
            problems.push("blob noise must be positive and radius finite".into());
        }
        problems
    }

    pub fn mean(&self, class: usize) -> Vec<f64> {
        let angle = std::f64::consts::TAU * class as f64 / self.classes as f64;
        let mut m = vec![0.0; self.dim];
        m[0] = self.radius * angle.cos();
        m[1] = self.radius * angle.sin();
        m
    }
}

pub fn sample_blobs(spec: &BlobSpec, n: usize, seed: u64) -> Result<LabeledSet> {
    let problems = spec.validate();
    if !problems.is_empty() {
        return Err(Error::InvalidArgument(problems.join("; ")));
    }
    let mut rng = rng_from(seed);
    let mut set = LabeledSet::empty(spec.classes);
    for _ in 0..n {
        let y = rng.random_range(0..spec.classes);
        let x = spec
            .mean(y)
            .into_iter()
            .map(|m| m + spec.noise * rng.sample::<f64, _>(StandardNormal))
            .collect();
        set.push(x, y);
    }
    Ok(set)
}

/// How one subset of a base dataset is drawn.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SubsetSpec {
    /// Nothing.
    #[default]
    None,
    /// Everything still unassigned.
    All,
    /// `size` uniformly random examples, regardless of class.
    Total { size: usize },
    /// Exact per-class counts.
    PerClass { counts: Vec<usize> },
    /// `size` examples split across classes by the given proportions.
    Proportions { size: usize, proportions: Vec<f64> },
    /// `size` examples with the class proportions of the unassigned remainder.
    Stratified { size: usize },
    /// `size` examples with the class proportions of the test subset.
    MatchTest { size: usize },
    /// A uniformly random `fraction` of the remainder, thinned to the largest
    /// subset with exactly the given class proportions. The thinned-out
    /// examples are discarded.
    Thinned { fraction: f64, proportions: Vec<f64> },
}

/// Recipe for carving a base dataset into disjoint subsets. Subsets are
/// carved in the order test, initial training, validation, target, pool.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitRecipe {
    pub test: SubsetSpec,
    pub init_train: SubsetSpec,
    pub validation: SubsetSpec,
    pub target: SubsetSpec,
    pub pool: SubsetSpec,
}

impl SplitRecipe {
    /// Unbalanced pool: classes 0-4 at 1/55 each and 5-9 at 10/55 each.
    pub fn unbalanced_pool_proportions() -> Vec<f64> {
        (0..10).map(|c| if c < 5 { 1.0 / 55.0 } else { 10.0 / 55.0 }).collect()
    }
}

/// One carved subset with its indices into the base.
#[derive(Debug, Clone, PartialEq)]
pub struct Subset {
    pub indices: Vec<usize>,
    pub data: LabeledSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Splits {
    pub test: Subset,
    pub init_train: Subset,
    pub validation: Subset,
    pub target: Subset,
    pub pool: Subset,
}

/// Largest-remainder rounding of `size * p` to integers summing to `size`.
pub fn apportion(size: usize, proportions: &[f64]) -> Result<Vec<usize>> {
    let total: f64 = proportions.iter().sum();
    if proportions.iter().any(|p| !(*p >= 0.0)) || !(total > 0.0) {
        return Err(Error::InvalidArgument(format!("invalid class proportions {proportions:?}")));
    }
    let exact: Vec<f64> = proportions.iter().map(|p| size as f64 * p / total).collect();
    let mut counts: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..exact.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    let short = size - counts.iter().sum::<usize>();
    for &c in order.iter().take(short) {
        counts[c] += 1;
    }
    Ok(counts)
}

struct Carver {
    /// Shuffled base indices per class, consumed from the front.
    by_class: Vec<Vec<usize>>,
    taken: Vec<bool>,
    rng: rand_chacha::ChaCha8Rng,
}

impl Carver {
    fn remaining_counts(&self) -> Vec<usize> {
        self.by_class.iter().map(|ix| ix.iter().filter(|&&i| !self.taken[i]).count()).collect()
    }

    fn take_class(&mut self, class: usize, count: usize) -> Result<Vec<usize>> {
        let available: Vec<usize> = self.by_class[class].iter().copied().filter(|&i| !self.taken[i]).collect();
        if available.len() < count {
            return Err(Error::InsufficientClass { class, requested: count, available: available.len() });
        }
        let chosen = available[..count].to_vec();
        for &i in &chosen {
            self.taken[i] = true;
        }
        Ok(chosen)
    }

    fn take_per_class(&mut self, counts: &[usize]) -> Result<Vec<usize>> {
        if counts.len() > self.by_class.len() {
            return Err(Error::InvalidArgument(format!(
                "{} per-class counts for {} classes",
                counts.len(),
                self.by_class.len()
            )));
        }
        let mut out = Vec::new();
        for (c, &n) in counts.iter().enumerate() {
            out.extend(self.take_class(c, n)?);
        }
        Ok(out)
    }

    fn take_uniform(&mut self, size: usize) -> Result<Vec<usize>> {
        let mut available: Vec<usize> = (0..self.taken.len()).filter(|&i| !self.taken[i]).collect();
        if available.len() < size {
            return Err(Error::InvalidArgument(format!(
                "requested {size} examples but only {} remain",
                available.len()
            )));
        }
        available.shuffle(&mut self.rng);
        available.truncate(size);
        for &i in &available {
            self.taken[i] = true;
        }
        Ok(available)
    }

    fn carve(&mut self, spec: &SubsetSpec, labels: &[usize], test_props: &[f64]) -> Result<Vec<usize>> {
        let mut indices = match spec {
            SubsetSpec::None => Vec::new(),
            SubsetSpec::All => {
                let all: Vec<usize> = (0..self.taken.len()).filter(|&i| !self.taken[i]).collect();
                all.iter().for_each(|&i| self.taken[i] = true);
                all
            }
            SubsetSpec::Total { size } => self.take_uniform(*size)?,
            SubsetSpec::PerClass { counts } => self.take_per_class(counts)?,
            SubsetSpec::Proportions { size, proportions } => self.take_per_class(&apportion(*size, proportions)?)?,
            SubsetSpec::Stratified { size } => {
                let props: Vec<f64> = self.remaining_counts().into_iter().map(|c| c as f64).collect();
                self.take_per_class(&apportion(*size, &props)?)?
            }
            SubsetSpec::MatchTest { size } => self.take_per_class(&apportion(*size, test_props)?)?,
            SubsetSpec::Thinned { fraction, proportions } => {
                if !(0.0..=1.0).contains(fraction) {
                    return Err(Error::InvalidArgument(format!("thinning fraction {fraction} outside [0, 1]")));
                }
                let remaining = self.taken.iter().filter(|t| !**t).count();
                let sample = self.take_uniform((fraction * remaining as f64).round() as usize)?;
                thin_to_proportions(&sample, labels, proportions, self.by_class.len())?
            }
        };
        indices.sort_unstable();
        Ok(indices)
    }
}

// Largest subset of `sample` whose class counts follow `proportions` exactly
// (up to largest-remainder rounding).
fn thin_to_proportions(sample: &[usize], labels: &[usize], proportions: &[f64], classes: usize) -> Result<Vec<usize>> {
    let mut by_class = vec![Vec::new(); classes];
    for &i in sample {
        by_class[labels[i]].push(i);
    }
    let total_p: f64 = proportions.iter().sum();
    let mut size = proportions
        .iter()
        .enumerate()
        .filter(|(_, p)| **p > 0.0)
        .map(|(c, p)| (by_class.get(c).map_or(0, Vec::len) as f64 / (p / total_p)).floor() as usize)
        .min()
        .unwrap_or(0);
    loop {
        let counts = apportion(size, proportions)?;
        if counts.iter().enumerate().all(|(c, &n)| n <= by_class.get(c).map_or(0, Vec::len)) {
            return Ok(counts.iter().enumerate().flat_map(|(c, &n)| by_class[c][..n].to_vec()).collect());
        }
        size -= 1;
    }
}

/// Carves `base` into disjoint subsets following `recipe`.
pub fn build_splits(base: &LabeledSet, recipe: &SplitRecipe, seed: u64) -> Result<Splits> {
    let mut rng = rng_from(seed);
    let mut by_class = vec![Vec::new(); base.num_classes];
    for (i, &y) in base.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for ix in &mut by_class {
        ix.shuffle(&mut rng);
    }
    let mut carver = Carver { by_class, taken: vec![false; base.len()], rng };
    let subset = |indices: Vec<usize>| Subset { data: base.subset(&indices), indices };

    let test = subset(carver.carve(&recipe.test, &base.labels, &[])?);
    let test_props = test.data.class_proportions();
    let init_train = subset(carver.carve(&recipe.init_train, &base.labels, &test_props)?);
    let validation = subset(carver.carve(&recipe.validation, &base.labels, &test_props)?);
    let target = subset(carver.carve(&recipe.target, &base.labels, &test_props)?);
    let pool = subset(carver.carve(&recipe.pool, &base.labels, &test_props)?);
    Ok(Splits { test, init_train, validation, target, pool })
}

/// Column layout of a labelled CSV file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub features: Vec<String>,
    pub label: String,
    pub num_classes: usize,
}

/// Reads a comma-separated file with one header row.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<LabeledSet> {
    let display = path.display().to_string();
    let err = |row: usize, message: String| Error::Csv { path: display.clone(), row, message };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| err(0, e.to_string()))?;
    let headers = reader.headers().map_err(|e| err(1, e.to_string()))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| err(1, format!("missing column `{name}`")))
    };
    let feature_cols = schema.features.iter().map(|f| column(f)).collect::<Result<Vec<_>>>()?;
    let label_col = column(&schema.label)?;

    let mut set = LabeledSet::empty(schema.num_classes);
    for (i, record) in reader.records().enumerate() {
        // Header is row 1.
        let row = i + 2;
        let record = record.map_err(|e| err(row, format!("malformed row: {e}")))?;
        let field = |col: usize| record.get(col).map(str::trim).ok_or_else(|| err(row, format!("missing field {col}")));
        let input = feature_cols
            .iter()
            .zip(&schema.features)
            .map(|(&col, name)| {
                let raw = field(col)?;
                raw.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(row, format!("feature `{name}` is not numeric: `{raw}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        let raw = field(label_col)?;
        let label: usize = raw.parse().map_err(|_| err(row, format!("label is not an integer: `{raw}`")))?;
        if label >= schema.num_classes {
            return Err(err(row, format!("label {label} outside [0, {})", schema.num_classes)));
        }
        set.push(input, label);
    }
    Ok(set)
}
