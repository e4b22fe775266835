//! Experiment configuration, read from JSON. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::search::{Distribution, Parameter, SearchSpace};
use crate::cqfs::CqfsConfig;
use crate::dataio::{SynthConfig, ValueMode};
use crate::error::{Error, Result};
use crate::io::read_json;
use crate::metrics::DEFAULT_MIL_PAIRS;
use crate::recmodels::{KnnParams, ModelKind, Weighting};
use crate::solvers::{AnnealSchedule, DEFAULT_NUM_SAMPLES};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    Synth(SynthConfig),
    Files {
        interactions: PathBuf,
        item_features: PathBuf,
        #[serde(default = "default_value_mode")]
        value_mode: ValueMode,
    },
}

fn default_value_mode() -> ValueMode {
    ValueMode::ImplicitBinary
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PreprocessConfig {
    pub min_user_interactions: usize,
    pub min_item_interactions: usize,
    pub min_feature_items: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            min_user_interactions: 1,
            min_item_interactions: 1,
            min_feature_items: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    /// Share of interactions whose items form the cold test pool.
    pub test_quota: f64,
    /// Share of interactions whose items form the cold validation pool.
    pub validation_quota: f64,
    /// Per-user share of warm interactions held out to tune the
    /// collaborative model.
    pub holdout_quota: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            test_quota: 0.2,
            validation_quota: 0.1,
            holdout_quota: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollaborativeConfig {
    pub kind: ModelKind,
    pub n_cases: usize,
    /// Replaces the default search space of `kind`.
    pub space: Option<SearchSpace>,
    /// Metric optimized on the held-out warm interactions.
    pub metric: String,
}

impl Default for CollaborativeConfig {
    fn default() -> Self {
        CollaborativeConfig {
            kind: ModelKind::ItemKnnCf,
            n_cases: 50,
            space: None,
            metric: "precision".into(),
        }
    }
}

impl CollaborativeConfig {
    pub fn search_space(&self) -> Result<SearchSpace> {
        if let Some(space) = &self.space {
            return Ok(space.clone());
        }
        match self.kind {
            ModelKind::ItemKnnCf => Ok(knn_space(false)),
            ModelKind::PureSvd => Ok(vec![Parameter::new(
                "num_factors",
                Distribution::IntUniform { low: 1, high: 350 },
            )]),
            ModelKind::Rp3Beta => Ok(vec![
                Parameter::new("topK", Distribution::IntUniform { low: 5, high: 1000 }),
                Parameter::new("alpha", Distribution::Uniform { low: 0.0, high: 2.0 }),
                Parameter::new("beta", Distribution::Uniform { low: 0.0, high: 2.0 }),
                Parameter::new("normalize", booleans()),
            ]),
            ModelKind::ItemKnnCbf => Err(Error::ConfigInvalid(
                "the collaborative model cannot be ItemKNN_CBF".into(),
            )),
        }
    }
}

fn booleans() -> Distribution {
    Distribution::Categorical {
        values: vec![Value::from(true), Value::from(false)],
    }
}

/// ItemKNN space: topK 5 to 1000, shrink 0 to 1000, normalize, weighting.
pub fn knn_space(with_weighting: bool) -> SearchSpace {
    let mut space = vec![
        Parameter::new("topK", Distribution::IntUniform { low: 5, high: 1000 }),
        Parameter::new("shrink", Distribution::IntUniform { low: 0, high: 1000 }),
        Parameter::new("normalize", booleans()),
    ];
    space.push(Parameter::new(
        "weighting",
        Distribution::Categorical {
            values: if with_weighting {
                vec!["none".into(), "tfidf".into(), "bm25".into()]
            } else {
                vec!["none".into()]
            },
        },
    ));
    space
}

/// Grid of QUBO hyperparameters; every combination is solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CqfsGrid {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub s: Vec<f64>,
    pub p: Vec<f64>,
}

impl Default for CqfsGrid {
    fn default() -> Self {
        CqfsGrid {
            alpha: vec![1.0],
            beta: vec![1.0, 1e-1, 1e-2, 1e-3, 1e-4],
            s: vec![1.0, 1e1, 1e2, 1e3, 1e4],
            p: vec![0.4, 0.6, 0.8, 0.95],
        }
    }
}

impl CqfsGrid {
    /// All combinations, `alpha` varying slowest and `p` fastest.
    pub fn points(&self) -> Vec<CqfsConfig> {
        let mut out = Vec::new();
        for &alpha in &self.alpha {
            for &beta in &self.beta {
                for &s in &self.s {
                    for &p in &self.p {
                        out.push(CqfsConfig { alpha, beta, p, s });
                    }
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.alpha.is_empty() || self.beta.is_empty() || self.s.is_empty() || self.p.is_empty() {
            return Err(Error::ConfigInvalid(
                "every cqfs grid axis needs at least one value".into(),
            ));
        }
        self.points().iter().try_for_each(CqfsConfig::validate)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverChoice {
    Exhaustive,
    Sa,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub kind: SolverChoice,
    pub num_samples: usize,
    /// Unit-scale schedule, rescaled to each QUBO. Defaults to the
    /// size-dependent schedule.
    pub schedule: Option<AnnealSchedule>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            kind: SolverChoice::Sa,
            num_samples: DEFAULT_NUM_SAMPLES,
            schedule: None,
        }
    }
}

/// Content-based model that supplies the content similarity of the QUBO and
/// ranks cold items for every grid point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbfTeacherConfig {
    /// Neighbors kept per item; all items when absent.
    #[serde(rename = "topK")]
    pub top_k: Option<usize>,
    pub shrink: f64,
    pub normalize: bool,
    pub weighting: Weighting,
}

impl Default for CbfTeacherConfig {
    fn default() -> Self {
        CbfTeacherConfig {
            top_k: None,
            shrink: 0.0,
            normalize: true,
            weighting: Weighting::None,
        }
    }
}

impl CbfTeacherConfig {
    pub fn params(&self, n_items: usize) -> KnnParams {
        KnnParams {
            top_k: self.top_k.unwrap_or(n_items).max(1),
            shrink: self.shrink,
            normalize: self.normalize,
            weighting: self.weighting,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CbfSearchConfig {
    pub n_cases: usize,
    pub space: Option<SearchSpace>,
}

impl Default for CbfSearchConfig {
    fn default() -> Self {
        CbfSearchConfig {
            n_cases: 50,
            space: None,
        }
    }
}

impl CbfSearchConfig {
    pub fn search_space(&self) -> SearchSpace {
        self.space.clone().unwrap_or_else(|| knn_space(true))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetSource,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub collaborative: CollaborativeConfig,
    #[serde(default)]
    pub cbf_teacher: CbfTeacherConfig,
    #[serde(default)]
    pub cqfs: CqfsGrid,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub cbf_search: CbfSearchConfig,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    /// Metric used to pick the grid point and the final content-based model
    /// on the cold validation items.
    #[serde(default = "default_selection_metric")]
    pub selection_metric: String,
    #[serde(default = "default_mil_pairs")]
    pub mil_max_pairs: usize,
    /// Worker threads; all available cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_cutoff() -> usize {
    10
}

fn default_selection_metric() -> String {
    "ndcg".into()
}

fn default_mil_pairs() -> usize {
    DEFAULT_MIL_PAIRS
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

const METRICS: [&str; 7] = [
    "precision",
    "recall",
    "ndcg",
    "map",
    "item_coverage",
    "gini_diversity",
    "mil",
];

impl ExperimentConfig {
    /// A configuration on the synthetic planted-feature dataset with default
    /// everything else.
    pub fn synthetic(seed: u64) -> Self {
        ExperimentConfig {
            seed,
            dataset: DatasetSource::Synth(SynthConfig::reference(seed)),
            preprocess: PreprocessConfig::default(),
            split: SplitConfig::default(),
            collaborative: CollaborativeConfig::default(),
            cbf_teacher: CbfTeacherConfig::default(),
            cqfs: CqfsGrid::default(),
            solver: SolverConfig::default(),
            cbf_search: CbfSearchConfig::default(),
            cutoff: default_cutoff(),
            selection_metric: default_selection_metric(),
            mil_max_pairs: default_mil_pairs(),
            workers: None,
            output_dir: default_output_dir(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::ConfigInvalid(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative dataset paths are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = read_json(path).map_err(|e| Error::ConfigInvalid(e.to_string()))?;
        if let (
            DatasetSource::Files {
                interactions,
                item_features,
                ..
            },
            Some(base),
        ) = (&mut cfg.dataset, path.parent())
        {
            for p in [interactions, item_features] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::ConfigInvalid(m));
        self.cqfs.validate()?;
        self.collaborative.search_space()?;
        if self.cutoff == 0 {
            return invalid("cutoff must be at least 1".into());
        }
        if self.collaborative.n_cases == 0 || self.cbf_search.n_cases == 0 {
            return invalid("search case budgets must be at least 1".into());
        }
        if self.solver.num_samples == 0 {
            return invalid("solver.num_samples must be at least 1".into());
        }
        if let Some(s) = &self.solver.schedule {
            s.validate()?;
        }
        for m in [&self.selection_metric, &self.collaborative.metric] {
            if !METRICS.contains(&m.as_str()) {
                return invalid(format!("unknown metric {m:?}; expected one of {METRICS:?}"));
            }
        }
        if self.workers == Some(0) {
            return invalid("workers must be at least 1".into());
        }
        let sp = &self.split;
        for q in [sp.test_quota, sp.validation_quota, sp.holdout_quota] {
            if !(0.0..1.0).contains(&q) {
                return invalid(format!("split quota {q} is outside [0, 1)"));
            }
        }
        if sp.test_quota <= 0.0 || sp.validation_quota <= 0.0 {
            return invalid("cold test and validation quotas must be positive".into());
        }
        if self.cbf_search.space.as_ref().is_some_and(Vec::is_empty)
            || self.collaborative.space.as_ref().is_some_and(Vec::is_empty)
        {
            return invalid("search spaces must not be empty".into());
        }
        Ok(())
    }
}
