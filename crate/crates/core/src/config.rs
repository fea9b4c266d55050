//! Declarative experiment configuration in JSON.
//!
//! Parsing never stops at the first problem: every missing key, type error
//! and failed cross-field check is collected and reported together.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::acquisition::AcquisitionMethod;
use crate::data::{BlobSpec, CsvSchema, SplitRecipe, StudentTInput, SubsetSpec};
use crate::error::{Error, Result};
use crate::models::ModelSpec;
use crate::prob::ProbVector;
use crate::target::TargetMode;

/// Where the base dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    /// Student-t inputs with labels from the tanh boundary.
    #[serde(rename = "synthetic-2d")]
    Synthetic2d {
        #[serde(default = "primary_input")]
        input: StudentTInput,
    },
    Blobs {
        #[serde(default)]
        spec: BlobSpec,
    },
    Csv {
        path: PathBuf,
        features: Vec<String>,
        label: String,
        num_classes: usize,
    },
}

fn primary_input() -> StudentTInput {
    StudentTInput::PRIMARY
}

impl DataSource {
    pub fn num_classes(&self) -> usize {
        match self {
            Self::Synthetic2d { .. } => 2,
            Self::Blobs { spec } => spec.classes,
            Self::Csv { num_classes, .. } => *num_classes,
        }
    }

    pub fn is_generated(&self) -> bool {
        !matches!(self, Self::Csv { .. })
    }

    pub fn csv_schema(&self) -> Option<CsvSchema> {
        match self {
            Self::Csv { features, label, num_classes, .. } => Some(CsvSchema {
                features: features.clone(),
                label: label.clone(),
                num_classes: *num_classes,
            }),
            _ => None,
        }
    }

    /// Recipe used when the task does not give one.
    pub fn default_recipe(&self) -> Option<SplitRecipe> {
        match self {
            Self::Synthetic2d { .. } => Some(SplitRecipe {
                test: SubsetSpec::Total { size: 10_000 },
                init_train: SubsetSpec::PerClass { counts: vec![2, 2] },
                validation: SubsetSpec::None,
                target: SubsetSpec::Total { size: 10_000 },
                pool: SubsetSpec::Total { size: 100_000 },
            }),
            Self::Blobs { spec } => Some(SplitRecipe {
                test: SubsetSpec::Total { size: 2_000 },
                init_train: SubsetSpec::PerClass { counts: vec![2; spec.classes] },
                validation: SubsetSpec::None,
                target: SubsetSpec::MatchTest { size: 1_000 },
                pool: SubsetSpec::Total { size: 5_000 },
            }),
            Self::Csv { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub source: DataSource,
    /// Size of the generated base dataset; by default twice what the recipe
    /// requests plus a margin.
    #[serde(default)]
    pub base_size: Option<usize>,
    #[serde(default)]
    pub recipe: Option<SplitRecipe>,
}

fn requested(spec: &SubsetSpec) -> usize {
    match spec {
        SubsetSpec::None | SubsetSpec::All | SubsetSpec::Thinned { .. } => 0,
        SubsetSpec::Total { size }
        | SubsetSpec::Proportions { size, .. }
        | SubsetSpec::Stratified { size }
        | SubsetSpec::MatchTest { size } => *size,
        SubsetSpec::PerClass { counts } => counts.iter().sum(),
    }
}

impl TaskSpec {
    pub fn recipe(&self) -> Option<SplitRecipe> {
        self.recipe.clone().or_else(|| self.source.default_recipe())
    }

    pub fn generated_base_size(&self) -> usize {
        self.base_size.unwrap_or_else(|| {
            let r = self.recipe().unwrap_or_default();
            let need: usize = [&r.test, &r.init_train, &r.validation, &r.target, &r.pool]
                .into_iter()
                .map(requested)
                .sum();
            2 * need + 1_000
        })
    }
}

/// Replaces the size of a sized subset, keeping its class structure.
pub fn resize_subset(spec: &SubsetSpec, size: usize) -> Result<SubsetSpec> {
    Ok(match spec {
        SubsetSpec::Total { .. } => SubsetSpec::Total { size },
        SubsetSpec::Proportions { proportions, .. } => SubsetSpec::Proportions { size, proportions: proportions.clone() },
        SubsetSpec::Stratified { .. } => SubsetSpec::Stratified { size },
        SubsetSpec::MatchTest { .. } => SubsetSpec::MatchTest { size },
        other => {
            return Err(Error::InvalidArgument(format!(
                "pool subset {other:?} has no size to sweep over"
            )))
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub task: TaskSpec,
    pub model: ModelSpec,
    pub acquisitions: Vec<AcquisitionMethod>,
    pub target_mode: TargetMode,
    /// Target class distribution for class-reweighted target sampling.
    pub p_targ_y: Option<Vec<f64>>,
    pub budget: usize,
    /// Posterior samples `K`; the model's native count when absent.
    pub posterior_samples: Option<usize>,
    /// Target inputs `M` drawn per acquisition step.
    pub target_samples: usize,
    /// Pool candidates scored per batch.
    pub score_chunk: usize,
    /// When present, runs are repeated for each pool size.
    pub pool_sizes: Option<Vec<usize>>,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

fn default_acquisitions() -> Vec<AcquisitionMethod> {
    vec![AcquisitionMethod::Random, AcquisitionMethod::Bald, AcquisitionMethod::Epig]
}

const KEYS: [&str; 12] = [
    "task",
    "model",
    "acquisitions",
    "target_mode",
    "p_targ_y",
    "budget",
    "posterior_samples",
    "target_samples",
    "score_chunk",
    "pool_sizes",
    "seeds",
    "output_dir",
];

fn field<T: DeserializeOwned>(map: &Map<String, Value>, key: &str, errors: &mut Vec<String>) -> Option<T> {
    let value = map.get(key)?;
    match serde_path_to_error::deserialize::<_, T>(value) {
        Ok(v) => Some(v),
        Err(e) => {
            let inner = e.path().to_string();
            let path = if inner == "." { key.to_string() } else { format!("{key}.{inner}") };
            errors.push(format!("{path}: {}", e.into_inner()));
            None
        }
    }
}

impl ExperimentConfig {
    /// Config with every optional key at its default.
    pub fn with_defaults(task: TaskSpec, model: ModelSpec) -> Self {
        Self {
            task,
            model,
            acquisitions: default_acquisitions(),
            target_mode: TargetMode::ExactTarget,
            p_targ_y: None,
            budget: 50,
            posterior_samples: None,
            target_samples: 100,
            score_chunk: 2048,
            pool_sizes: None,
            seeds: vec![0],
            output_dir: PathBuf::from("results"),
        }
    }

    /// Parses and validates a config value; relative paths resolve against
    /// `base_dir`.
    pub fn from_value(value: &Value, base_dir: Option<&Path>) -> Result<Self> {
        let Some(map) = value.as_object() else {
            return Err(Error::Config(vec!["config must be a JSON object".into()]));
        };
        let mut errors = Vec::new();
        for key in map.keys() {
            if !KEYS.contains(&key.as_str()) {
                errors.push(format!("{key}: unknown key (expected one of {})", KEYS.join(", ")));
            }
        }
        for key in ["task", "model"] {
            if !map.contains_key(key) {
                errors.push(format!("{key}: missing required key"));
            }
        }
        let task: Option<TaskSpec> = field(map, "task", &mut errors);
        let model: Option<ModelSpec> = field(map, "model", &mut errors);
        let acquisitions = field(map, "acquisitions", &mut errors);
        let target_mode = field(map, "target_mode", &mut errors);
        let p_targ_y = field::<Option<Vec<f64>>>(map, "p_targ_y", &mut errors);
        let budget = field(map, "budget", &mut errors);
        let posterior_samples = field::<Option<usize>>(map, "posterior_samples", &mut errors);
        let target_samples = field(map, "target_samples", &mut errors);
        let score_chunk = field(map, "score_chunk", &mut errors);
        let pool_sizes = field::<Option<Vec<usize>>>(map, "pool_sizes", &mut errors);
        let seeds = field(map, "seeds", &mut errors);
        let output_dir = field(map, "output_dir", &mut errors);

        let (Some(task), Some(model)) = (task, model) else {
            return Err(Error::Config(errors));
        };
        let mut cfg = Self::with_defaults(task, model);
        if let Some(v) = acquisitions {
            cfg.acquisitions = v;
        }
        if let Some(v) = target_mode {
            cfg.target_mode = v;
        }
        if let Some(v) = p_targ_y {
            cfg.p_targ_y = v;
        }
        if let Some(v) = budget {
            cfg.budget = v;
        }
        if let Some(v) = posterior_samples {
            cfg.posterior_samples = v;
        }
        if let Some(v) = target_samples {
            cfg.target_samples = v;
        }
        if let Some(v) = score_chunk {
            cfg.score_chunk = v;
        }
        if let Some(v) = pool_sizes {
            cfg.pool_sizes = v;
        }
        if let Some(v) = seeds {
            cfg.seeds = v;
        }
        if let Some(v) = output_dir {
            cfg.output_dir = v;
        }
        if let (Some(dir), DataSource::Csv { path, .. }) = (base_dir, &mut cfg.task.source) {
            if path.is_relative() {
                *path = dir.join(&*path);
            }
        }
        errors.extend(cfg.problems());
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors))
        }
    }

    pub fn from_json(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("invalid JSON: {e}")]))?;
        Self::from_value(&value, base_dir)
    }

    /// Reads, applies `KEY=VALUE` overrides, and validates.
    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut value: Value = serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("invalid JSON: {e}")]))?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        Self::from_value(&value, path.parent())
    }

    /// Every semantic problem with the config.
    pub fn problems(&self) -> Vec<String> {
        let mut p = Vec::new();
        let classes = self.task.source.num_classes();
        match &self.task.source {
            DataSource::Synthetic2d { .. } => {}
            DataSource::Blobs { spec } => p.extend(spec.validate().into_iter().map(|e| format!("task.source: {e}"))),
            DataSource::Csv { path, features, num_classes, .. } => {
                if !path.is_file() {
                    p.push(format!("task.source.path: file {} does not exist", path.display()));
                }
                if features.is_empty() {
                    p.push("task.source.features: at least one feature column is required".into());
                }
                if *num_classes < 2 {
                    p.push("task.source.num_classes: at least 2 classes are required".into());
                }
            }
        }
        let recipe = self.task.recipe();
        match &recipe {
            None => p.push("task.recipe: required for csv tasks".into()),
            Some(r) => {
                if let SubsetSpec::PerClass { counts } = &r.init_train {
                    if counts.len() != classes {
                        p.push(format!("task.recipe.init_train: {} counts for {classes} classes", counts.len()));
                    }
                }
                if self.pool_sizes.is_some() {
                    if let Err(e) = resize_subset(&r.pool, 1) {
                        p.push(format!("pool_sizes: {e}"));
                    }
                }
                let needs_exact = self.target_mode == TargetMode::ExactTarget
                    && self.acquisitions.iter().any(|a| a.needs_targets());
                if needs_exact && r.target == SubsetSpec::None {
                    p.push("task.recipe.target: exact-target mode needs a target subset".into());
                }
                if matches!(self.model, ModelSpec::Mlp(_)) && r.validation == SubsetSpec::None {
                    p.push("task.recipe.validation: the mlp model needs a validation subset".into());
                }
            }
        }
        match &self.model {
            ModelSpec::Gp(cfg) => {
                p.extend(cfg.validate().into_iter().map(|e| format!("model: {e}")));
                if classes != 2 {
                    p.push(format!("model: gp is binary but the task has {classes} classes"));
                }
            }
            ModelSpec::Forest(cfg) => p.extend(cfg.validate().into_iter().map(|e| format!("model: {e}"))),
            ModelSpec::Mlp(cfg) => p.extend(cfg.validate().into_iter().map(|e| format!("model: {e}"))),
            ModelSpec::Discrete(_) => {}
        }
        if self.acquisitions.is_empty() {
            p.push(format!(
                "acquisitions: at least one of {} is required",
                AcquisitionMethod::ALL.map(AcquisitionMethod::name).join(", ")
            ));
        }
        let uses_targets = self.acquisitions.iter().any(|a| a.needs_targets());
        if uses_targets && self.target_mode == TargetMode::ClassReweighted {
            match &self.p_targ_y {
                None => p.push("p_targ_y: required when target_mode is class-reweighted".into()),
                Some(v) if v.len() != classes => p.push(format!("p_targ_y: {} entries for {classes} classes", v.len())),
                Some(v) => {
                    if let Err(e) = ProbVector::new(v.clone()) {
                        p.push(format!("p_targ_y: {e}"));
                    }
                }
            }
        }
        if self.posterior_samples == Some(0) {
            p.push("posterior_samples: must be at least 1".into());
        }
        if self.target_samples == 0 {
            p.push("target_samples: must be at least 1".into());
        }
        if self.score_chunk == 0 {
            p.push("score_chunk: must be at least 1".into());
        }
        if self.seeds.is_empty() {
            p.push("seeds: at least one seed is required".into());
        }
        if let Some(sizes) = &self.pool_sizes {
            if sizes.is_empty() || sizes.contains(&0) {
                p.push("pool_sizes: sizes must be non-empty and positive".into());
            }
        }
        p
    }

    pub fn posterior_samples(&self) -> usize {
        self.posterior_samples.unwrap_or_else(|| self.model.default_samples())
    }

    /// Copy whose pool subset has `size` members.
    pub fn with_pool_size(&self, size: usize) -> Result<Self> {
        let mut cfg = self.clone();
        let mut recipe = cfg
            .task
            .recipe()
            .ok_or_else(|| Error::InvalidArgument("task has no recipe".into()))?;
        recipe.pool = resize_subset(&recipe.pool, size)?;
        cfg.task.recipe = Some(recipe);
        cfg.pool_sizes = None;
        Ok(cfg)
    }

    /// SHA-256 over the canonical JSON of everything that determines a run's
    /// results; output location and seed list are excluded. Object keys are
    /// sorted, so key order in the source file does not matter.
    pub fn digest(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
            map.remove("seeds");
        }
        hex::encode(Sha256::digest(value.to_string().as_bytes()))
    }
}

/// Sets a dotted `KEY=VALUE` path; the value is parsed as JSON when possible
/// and taken as a string otherwise.
pub fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(vec![format!("override `{assignment}` is not KEY=VALUE")]))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(vec![format!("override key `{key}` is malformed")]));
    }
    let mut at = root;
    for part in &parts[..parts.len() - 1] {
        let map = at
            .as_object_mut()
            .ok_or_else(|| Error::Config(vec![format!("override `{key}`: `{part}` is not inside an object")]))?;
        at = map.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    let map = at
        .as_object_mut()
        .ok_or_else(|| Error::Config(vec![format!("override `{key}` does not address an object field")]))?;
    map.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"task": {"source": {"kind": "synthetic-2d"}}, "model": {"kind": "gp"}}"#;

    fn errors(text: &str) -> Vec<String> {
        match ExperimentConfig::from_json(text, None) {
            Err(Error::Config(e)) => e,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL, None).unwrap();
        assert_eq!(cfg.budget, 50);
        assert_eq!(cfg.acquisitions, default_acquisitions());
        assert_eq!(cfg.posterior_samples(), 5000);
        assert_eq!(cfg.target_samples, 100);
        assert_eq!(cfg.model, ModelSpec::Gp(Default::default()));
        assert_eq!(cfg.task.recipe().unwrap().pool, SubsetSpec::Total { size: 100_000 });
        assert_eq!(cfg.task.source, DataSource::Synthetic2d { input: StudentTInput::PRIMARY });
    }

    #[test]
    fn unknown_acquisition_names_the_field() {
        let e = errors(r#"{"task": {"source": {"kind": "synthetic-2d"}}, "model": {"kind": "gp"}, "acquisitions": ["bald", "coreset"]}"#);
        assert_eq!(e.len(), 1);
        assert!(e[0].starts_with("acquisitions"), "{e:?}");
        assert!(e[0].contains("epig-mc"), "{e:?}");
    }

    #[test]
    fn reweighting_needs_a_target_marginal() {
        let e = errors(
            r#"{"task": {"source": {"kind": "synthetic-2d"}}, "model": {"kind": "gp"},
                "acquisitions": ["epig"], "target_mode": "class-reweighted"}"#,
        );
        assert!(e.iter().any(|m| m.starts_with("p_targ_y")), "{e:?}");
    }

    #[test]
    fn all_errors_are_collected() {
        let e = errors(r#"{"model": {"kind": "gp", "steps": "many"}, "budget": -1, "colour": 3, "seeds": []}"#);
        assert!(e.iter().any(|m| m.starts_with("task: missing")), "{e:?}");
        assert!(e.iter().any(|m| m.starts_with("model")), "{e:?}");
        assert!(e.iter().any(|m| m.starts_with("budget")), "{e:?}");
        assert!(e.iter().any(|m| m.starts_with("colour")), "{e:?}");
        assert!(e.len() >= 4);
    }

    #[test]
    fn digest_ignores_key_order() {
        let a = ExperimentConfig::from_json(
            r#"{"budget": 10, "model": {"kind": "gp", "steps": 5}, "task": {"source": {"kind": "synthetic-2d"}}}"#,
            None,
        )
        .unwrap();
        let b = ExperimentConfig::from_json(
            r#"{"task": {"source": {"kind": "synthetic-2d"}}, "model": {"steps": 5, "kind": "gp"}, "budget": 10}"#,
            None,
        )
        .unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = ExperimentConfig { budget: 11, ..a.clone() };
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn overrides_edit_nested_keys() {
        let mut v: Value = serde_json::from_str(MINIMAL).unwrap();
        apply_override(&mut v, "model.steps=20").unwrap();
        apply_override(&mut v, "acquisitions=[\"bald\"]").unwrap();
        apply_override(&mut v, "output_dir=out/x").unwrap();
        let cfg = ExperimentConfig::from_value(&v, None).unwrap();
        assert_eq!(cfg.acquisitions, vec![AcquisitionMethod::Bald]);
        assert_eq!(cfg.output_dir, PathBuf::from("out/x"));
        match cfg.model {
            ModelSpec::Gp(g) => assert_eq!(g.steps, 20),
            other => panic!("{other:?}"),
        }
        assert!(apply_override(&mut v, "budget").is_err());
    }

    #[test]
    fn pool_resizing_keeps_proportions() {
        let p = SubsetSpec::Proportions { size: 10, proportions: vec![0.5, 0.5] };
        assert_eq!(resize_subset(&p, 4).unwrap(), SubsetSpec::Proportions { size: 4, proportions: vec![0.5, 0.5] });
        assert!(resize_subset(&SubsetSpec::All, 4).is_err());
    }
}
