//! Pool-based active learning: score the pool, acquire a label, retrain from
//! scratch, evaluate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{random_scores, score_candidates, select_argmax, AcquisitionMethod, AcquisitionScore, TargetBatch};
use crate::config::{DataSource, ExperimentConfig};
use crate::data::{build_splits, load_csv, sample_blobs, sample_labels, sample_student_t, LabeledSet, Splits};
use crate::error::{Error, Result};
use crate::models::StochasticClassifier;
use crate::prob::{ProbVector, LOG_FLOOR};
use crate::seed::{SeedTree, Stream};
use crate::target::{TargetMode, TargetSampler};

/// Unlabelled candidates with stable indices.
#[derive(Debug, Clone)]
pub struct Pool {
    data: LabeledSet,
    acquired: Vec<bool>,
}

impl Pool {
    /// Labels are hidden from the loop until acquired.
    pub fn new(data: LabeledSet) -> Self {
        let acquired = vec![false; data.len()];
        Self { data, acquired }
    }

    pub fn len(&self) -> usize {
        self.acquired.len()
    }

    pub fn is_empty(&self) -> bool {
        self.acquired.is_empty()
    }

    pub fn available(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.acquired[i]).collect()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.data.inputs[i]
    }

    pub fn is_acquired(&self, i: usize) -> bool {
        self.acquired[i]
    }

    /// Marks `i` acquired and reveals its label.
    pub fn acquire(&mut self, i: usize) -> Result<(Vec<f64>, usize)> {
        if i >= self.len() || self.acquired[i] {
            return Err(Error::InvalidArgument(format!("pool index {i} is unavailable")));
        }
        self.acquired[i] = true;
        Ok((self.data.inputs[i].clone(), self.data.labels[i]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub nll: f64,
}

/// One learning-curve point. Step 0 is the initial model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub labels_used: usize,
    pub acquired_index: Option<usize>,
    pub score: Option<f64>,
    pub accuracy: f64,
    pub nll: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurve {
    pub records: Vec<StepRecord>,
}

impl LearningCurve {
    pub fn final_accuracy(&self) -> Option<f64> {
        self.records.last().map(|r| r.accuracy)
    }

    pub fn acquired_indices(&self) -> Vec<usize> {
        self.records.iter().filter_map(|r| r.acquired_index).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub acquisition: AcquisitionMethod,
    pub config_digest: String,
    pub curve: LearningCurve,
    pub wall_time_secs: f64,
}

/// Accuracy with argmax ties going to the lowest class, and mean negative
/// log-likelihood with probabilities floored at `LOG_FLOOR`.
pub fn evaluate_predictions(predictions: &[ProbVector], test: &LabeledSet) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    if predictions.len() != test.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predictions for {} test examples",
            predictions.len(),
            test.len()
        )));
    }
    let n = test.len() as f64;
    let mut correct = 0usize;
    let mut nll = 0.0;
    for (p, &y) in predictions.iter().zip(&test.labels) {
        correct += usize::from(p.argmax() == y);
        nll -= p.probs()[y].max(LOG_FLOOR).ln();
    }
    Ok(Evaluation { accuracy: correct as f64 / n, nll: nll / n })
}

pub fn evaluate(model: &dyn StochasticClassifier, test: &LabeledSet, seed: u64) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    evaluate_predictions(&model.predict_marginal(&test.inputs, seed)?, test)
}

/// Builds the base dataset for a task and carves it per the recipe.
pub fn build_task(cfg: &ExperimentConfig, seed: u64) -> Result<Splits> {
    let tree = SeedTree::new(seed);
    let source = &cfg.task.source;
    let base = match source {
        DataSource::Synthetic2d { input } => {
            let n = cfg.task.generated_base_size();
            let inputs = sample_student_t(input, n, tree.seed(Stream::Data, 0))?;
            sample_labels(inputs, tree.seed(Stream::Labels, 0))
        }
        DataSource::Blobs { spec } => sample_blobs(spec, cfg.task.generated_base_size(), tree.seed(Stream::Data, 0))?,
        DataSource::Csv { path, .. } => {
            let schema = source.csv_schema().expect("csv source has a schema");
            let set = load_csv(path, &schema)?;
            if set.is_empty() {
                return Err(Error::Empty("csv dataset"));
            }
            set
        }
    };
    let recipe = cfg
        .task
        .recipe()
        .ok_or_else(|| Error::InvalidArgument("task has no split recipe".into()))?;
    build_splits(&base, &recipe, tree.seed(Stream::Data, 1))
}

/// Everything needed to score one pool snapshot.
struct StepContext<'a> {
    cfg: &'a ExperimentConfig,
    method: AcquisitionMethod,
    model: &'a dyn StochasticClassifier,
    pool: &'a Pool,
    targets: &'a [Vec<f64>],
    tree: SeedTree,
    step: u64,
}

impl StepContext<'_> {
    fn target_inputs(&self, pool_inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let m = self.cfg.target_samples;
        let seed = self.tree.seed(Stream::Targets, self.step);
        let preds;
        let p_targ;
        let sampler = match self.cfg.target_mode {
            TargetMode::ExactTarget => TargetSampler::ExactTarget { source: self.targets },
            TargetMode::PoolProxy => TargetSampler::PoolProxy { source: pool_inputs },
            TargetMode::ClassReweighted => {
                preds = self
                    .model
                    .predict_marginal(pool_inputs, self.tree.seed(Stream::Posterior, 2 * self.step + 1))?;
                p_targ = ProbVector::new(self.cfg.p_targ_y.clone().ok_or_else(|| {
                    Error::InvalidArgument("class-reweighted mode needs p_targ_y".into())
                })?)?;
                TargetSampler::ClassReweighted {
                    source: pool_inputs,
                    pool_predictions: Some(&preds),
                    p_targ_y: Some(&p_targ),
                }
            }
        };
        sampler.sample_targets(m, seed)
    }

    fn score(&self) -> Result<Vec<AcquisitionScore>> {
        let available = self.pool.available();
        let acq_seed = self.tree.seed(Stream::Acquisition, self.step);
        if self.method == AcquisitionMethod::Random {
            return Ok(random_scores(&available, acq_seed));
        }
        let k = self.cfg.posterior_samples();
        let posterior_seed = self.tree.seed(Stream::Posterior, 2 * self.step);
        let needs_targets = self.method.needs_targets();
        let (anchors, mode) = if needs_targets {
            let pool_inputs: Vec<Vec<f64>> = available.iter().map(|&i| self.pool.input(i).to_vec()).collect();
            (self.target_inputs(&pool_inputs)?, Some(self.cfg.target_mode))
        } else {
            (Vec::new(), None)
        };
        let sampler = self.model.posterior_sampler(&anchors, k, posterior_seed)?;
        let batch = match mode {
            Some(mode) => Some(TargetBatch::new(sampler.anchor_tensors().to_vec(), mode)?),
            None => None,
        };
        let chunks: Vec<Vec<AcquisitionScore>> = available
            .par_chunks(self.cfg.score_chunk)
            .map(|idx| {
                let inputs: Vec<Vec<f64>> = idx.iter().map(|&i| self.pool.input(i).to_vec()).collect();
                let tensors = sampler.sample(&inputs)?;
                score_candidates(&tensors, idx, batch.as_ref(), self.method, acq_seed)
            })
            .collect::<Result<_>>()?;
        Ok(chunks.into_iter().flatten().collect())
    }
}

/// One seeded active-learning run with a single acquisition method.
pub fn run_active_learning(cfg: &ExperimentConfig, method: AcquisitionMethod, seed: u64) -> Result<RunResult> {
    let start = Instant::now();
    let tree = SeedTree::new(seed);
    let splits = build_task(cfg, seed)?;
    let mut pool = Pool::new(splits.pool.data);
    let mut train = splits.init_train.data;
    let validation = splits.validation.data;
    let test = splits.test.data;
    let targets = splits.target.data.inputs;
    // Same seed at every step: the model depends only on its training data.
    let model_seed = tree.seed(Stream::Model, 0);
    let eval_seed = tree.seed(Stream::Posterior, u64::MAX);
    let fit = |train: &LabeledSet, step: usize| {
        cfg.model
            .fit(train, &validation, model_seed)
            .map_err(|e| Error::Training { step, source: Box::new(e) })
    };

    let mut model = fit(&train, 0)?;
    let eval = evaluate(model.as_ref(), &test, eval_seed)?;
    let mut records = vec![StepRecord {
        step: 0,
        labels_used: train.len(),
        acquired_index: None,
        score: None,
        accuracy: eval.accuracy,
        nll: eval.nll,
    }];
    for step in 1..=cfg.budget {
        if pool.available().is_empty() {
            return Err(Error::PoolExhausted { acquired: step - 1, budget: cfg.budget });
        }
        let ctx = StepContext {
            cfg,
            method,
            model: model.as_ref(),
            pool: &pool,
            targets: &targets,
            tree,
            step: step as u64,
        };
        let scores = ctx.score()?;
        let chosen = select_argmax(&scores, tree.seed(Stream::TieBreak, step as u64))?;
        let score = scores
            .iter()
            .find(|s| s.candidate_index == chosen)
            .map(|s| s.score);
        let (x, y) = pool.acquire(chosen)?;
        train.push(x, y);
        model = fit(&train, step)?;
        let eval = evaluate(model.as_ref(), &test, eval_seed)?;
        records.push(StepRecord {
            step,
            labels_used: train.len(),
            acquired_index: Some(chosen),
            score,
            accuracy: eval.accuracy,
            nll: eval.nll,
        });
    }
    Ok(RunResult {
        seed,
        acquisition: method,
        config_digest: cfg.digest(),
        curve: LearningCurve { records },
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// Per-step mean and standard error across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatePoint {
    pub step: usize,
    pub mean_accuracy: f64,
    pub se_accuracy: f64,
    pub mean_nll: f64,
    pub se_nll: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replicated {
    pub acquisition: AcquisitionMethod,
    pub runs: Vec<RunResult>,
    pub aggregate: Vec<AggregatePoint>,
}

impl Replicated {
    pub fn final_point(&self) -> Option<&AggregatePoint> {
        self.aggregate.last()
    }
}

/// Sample mean and standard error; the error is zero for a single value.
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

pub fn aggregate(runs: &[RunResult]) -> Vec<AggregatePoint> {
    let steps = runs.iter().map(|r| r.curve.records.len()).min().unwrap_or(0);
    (0..steps)
        .map(|s| {
            let acc: Vec<f64> = runs.iter().map(|r| r.curve.records[s].accuracy).collect();
            let nll: Vec<f64> = runs.iter().map(|r| r.curve.records[s].nll).collect();
            let (mean_accuracy, se_accuracy) = mean_se(&acc);
            let (mean_nll, se_nll) = mean_se(&nll);
            AggregatePoint { step: runs[0].curve.records[s].step, mean_accuracy, se_accuracy, mean_nll, se_nll }
        })
        .collect()
}

/// Runs every seed, in parallel across seeds, and aggregates. A failed run
/// is reported with its seed.
pub fn run_replicated(cfg: &ExperimentConfig, method: AcquisitionMethod, seeds: &[u64]) -> Result<Replicated> {
    if seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let runs = seeds
        .par_iter()
        .map(|&seed| run_active_learning(cfg, method, seed).map_err(|e| Error::Run { seed, source: Box::new(e) }))
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&runs);
    Ok(Replicated { acquisition: method, runs, aggregate })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolSizeResult {
    pub pool_size: usize,
    pub replicated: Replicated,
}

pub fn run_pool_size_sweep(
    cfg: &ExperimentConfig,
    method: AcquisitionMethod,
    pool_sizes: &[usize],
    seeds: &[u64],
) -> Result<Vec<PoolSizeResult>> {
    pool_sizes
        .iter()
        .map(|&pool_size| {
            let sized = cfg.with_pool_size(pool_size)?;
            Ok(PoolSizeResult { pool_size, replicated: run_replicated(&sized, method, seeds)? })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TaskSpec;
    use crate::data::{SplitRecipe, SubsetSpec};
    use crate::models::{ForestConfig, GpConfig, ModelSpec};

    fn pv(p: &[f64]) -> ProbVector {
        ProbVector::new(p.to_vec()).unwrap()
    }

    fn synthetic(pool: usize, budget: usize, method: AcquisitionMethod) -> ExperimentConfig {
        let task = TaskSpec {
            source: DataSource::Synthetic2d { input: crate::data::StudentTInput::PRIMARY },
            base_size: None,
            recipe: Some(SplitRecipe {
                test: SubsetSpec::Total { size: 300 },
                init_train: SubsetSpec::PerClass { counts: vec![2, 2] },
                validation: SubsetSpec::None,
                target: SubsetSpec::Total { size: 200 },
                pool: SubsetSpec::Total { size: pool },
            }),
        };
        let model = ModelSpec::Gp(GpConfig { steps: 150, ..GpConfig::default() });
        ExperimentConfig {
            acquisitions: vec![method],
            budget,
            posterior_samples: Some(64),
            target_samples: 16,
            score_chunk: 7,
            ..ExperimentConfig::with_defaults(task, model)
        }
    }

    #[test]
    fn evaluation_examples() {
        let test = LabeledSet::new(vec![vec![0.0]; 3], vec![0, 1, 1], 2).unwrap();
        let perfect = vec![pv(&[1.0, 0.0]), pv(&[0.0, 1.0]), pv(&[0.0, 1.0])];
        let e = evaluate_predictions(&perfect, &test).unwrap();
        assert_eq!((e.accuracy, e.nll), (1.0, 0.0));

        let uniform = vec![pv(&[0.5, 0.5]); 3];
        let e = evaluate_predictions(&uniform, &test).unwrap();
        assert_close!(e.accuracy, 1.0 / 3.0, 1e-15);
        assert_close!(e.nll, std::f64::consts::LN_2, 1e-15);

        let hand = vec![pv(&[0.8, 0.2]), pv(&[0.6, 0.4]), pv(&[0.1, 0.9])];
        let e = evaluate_predictions(&hand, &test).unwrap();
        assert_close!(e.accuracy, 2.0 / 3.0, 1e-15);
        assert_close!(e.nll, -(0.8f64.ln() + 0.4f64.ln() + 0.9f64.ln()) / 3.0, 1e-15);

        assert!(evaluate_predictions(&[], &LabeledSet::empty(2)).is_err());
    }

    #[test]
    fn zero_budget_records_only_the_initial_model() {
        let run = run_active_learning(&synthetic(20, 0, AcquisitionMethod::Bald), AcquisitionMethod::Bald, 1).unwrap();
        assert_eq!(run.curve.records.len(), 1);
        assert_eq!(run.curve.records[0].labels_used, 4);
        assert_eq!(run.curve.records[0].acquired_index, None);
    }

    #[test]
    fn single_element_pool_is_acquired() {
        let run = run_active_learning(&synthetic(1, 1, AcquisitionMethod::Epig), AcquisitionMethod::Epig, 2).unwrap();
        assert_eq!(run.curve.acquired_indices(), vec![0]);
        let err = run_active_learning(&synthetic(1, 2, AcquisitionMethod::Random), AcquisitionMethod::Random, 2);
        assert!(matches!(err, Err(Error::PoolExhausted { acquired: 1, budget: 2 })));
    }

    #[test]
    fn runs_are_reproducible_and_never_repeat_indices() {
        for method in AcquisitionMethod::ALL {
            let cfg = synthetic(30, 5, method);
            let a = run_active_learning(&cfg, method, 7).unwrap();
            let b = run_active_learning(&cfg, method, 7).unwrap();
            assert_eq!(a.curve, b.curve, "{method}");
            let mut idx = a.curve.acquired_indices();
            assert_eq!(idx.len(), 5);
            idx.sort_unstable();
            idx.dedup();
            assert_eq!(idx.len(), 5, "{method}");
            let labels: Vec<usize> = a.curve.records.iter().map(|r| r.labels_used).collect();
            assert_eq!(labels, (4..=9).collect::<Vec<_>>());
        }
    }

    #[test]
    fn chunking_does_not_change_the_choice() {
        let cfg = synthetic(40, 3, AcquisitionMethod::Epig);
        let wide = ExperimentConfig { score_chunk: 1000, ..cfg.clone() };
        let a = run_active_learning(&cfg, AcquisitionMethod::Epig, 4).unwrap();
        let b = run_active_learning(&wide, AcquisitionMethod::Epig, 4).unwrap();
        assert_eq!(a.curve.acquired_indices(), b.curve.acquired_indices());
    }

    #[test]
    fn replication_statistics() {
        let cfg = synthetic(15, 2, AcquisitionMethod::Random);
        let single = run_replicated(&cfg, AcquisitionMethod::Random, &[3]).unwrap();
        for (p, r) in single.aggregate.iter().zip(&single.runs[0].curve.records) {
            assert_eq!((p.mean_accuracy, p.se_accuracy), (r.accuracy, 0.0));
        }
        let twice = run_replicated(&cfg, AcquisitionMethod::Random, &[3, 3]).unwrap();
        assert!(twice.aggregate.iter().all(|p| p.se_accuracy == 0.0 && p.se_nll == 0.0));
        assert!(run_replicated(&cfg, AcquisitionMethod::Random, &[]).is_err());
        let sweep = run_pool_size_sweep(&cfg, AcquisitionMethod::Random, &[15], &[3]).unwrap();
        assert_eq!(sweep[0].replicated.aggregate, single.aggregate);
    }

    #[test]
    fn reweighted_and_proxy_modes_run_with_a_forest() {
        let task = TaskSpec {
            source: DataSource::Blobs { spec: Default::default() },
            base_size: None,
            recipe: None,
        };
        for mode in [TargetMode::PoolProxy, TargetMode::ClassReweighted] {
            let cfg = ExperimentConfig {
                acquisitions: vec![AcquisitionMethod::Epig],
                target_mode: mode,
                p_targ_y: Some(vec![0.1; 10]),
                budget: 2,
                target_samples: 8,
                ..ExperimentConfig::with_defaults(task.clone(), ModelSpec::Forest(ForestConfig { trees: 10, ..Default::default() }))
            };
            assert!(cfg.problems().is_empty(), "{:?}", cfg.problems());
            let run = run_active_learning(&cfg, AcquisitionMethod::Epig, 0).unwrap();
            assert_eq!(run.curve.records.len(), 3);
        }
    }
}
