//! Staged execution with on-disk artifacts.
//!
//! Every stage writes into its own directory under the output root and
//! finishes by writing `stage.json` with a key derived from the configuration
//! slice it depends on and the keys of its upstream stages. A stage whose key
//! matches and whose artifacts load is reused; otherwise its directory is
//! rebuilt from scratch.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::baselines::{
    baseline_random_selection, baseline_tfidf_selection, feature_selection_stats, feature_stats_tsv,
};
use super::config::{DatasetSource, ExperimentConfig};
use super::search::{random_search, Point, SearchOutcome};
use super::stages::{
    argmax, content_hash, derive_seed, fit_collaborative, fit_content, restrict_features, score_selections,
    solve_selection, RankingTask,
};
use crate::cqfs::{assemble_qubo, build_fpm, build_ipm, build_penalization, CqfsConfig, QuboProblem};
use crate::dataio::{
    cold_item_split, load_interactions, load_item_features, preprocess, synth_planted, user_holdout_split, ColdSplit,
    Dataset, HoldoutSplit,
};
use crate::error::{Error, Result};
use crate::io::{read_json, write_atomic, write_json};
use crate::metrics::EvalReport;
use crate::recmodels::{item_knn_cbf, SimilarityModel};
use crate::solvers::SelectionResult;
use crate::sparse::SparseMatrix;

pub const STAGE_DATASET: &str = "dataset";
pub const STAGE_SPLIT: &str = "split";
pub const STAGE_CF: &str = "cf";
pub const STAGE_QUBO: &str = "qubo";
pub const STAGE_SELECT: &str = "select";
pub const STAGE_CBF: &str = "cbf";
pub const STAGE_REPORTS: &str = "reports";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub key: String,
    pub dir: PathBuf,
    pub cached: bool,
    pub seconds: f64,
}

/// Summary of one invocation, written to `<out>/run.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub config_hash: String,
    pub output_dir: PathBuf,
    pub stages: Vec<StageRecord>,
}

#[derive(Serialize, Deserialize)]
struct StageStamp {
    stage: String,
    key: String,
}

#[derive(Clone, Debug)]
pub struct Splits {
    pub cold: ColdSplit,
    /// Warm interactions split per user to tune the collaborative model.
    pub holdout: HoldoutSplit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub config: CqfsConfig,
    /// Index of the feature penalization matrix shared by all points with the
    /// same `alpha` and `beta`.
    pub fpm: usize,
}

#[derive(Clone, Debug)]
pub struct QuboStage {
    pub grid: Vec<GridPoint>,
    pub fpms: Vec<SparseMatrix>,
}

impl QuboStage {
    pub fn qubo(&self, i: usize) -> Result<QuboProblem> {
        let point = &self.grid[i];
        assemble_qubo(&self.fpms[point.fpm], &point.config)
    }
}

/// A feature subset together with its tuned content-based model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub name: String,
    pub features: Vec<usize>,
    pub params: Point,
    pub validation_score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentStage {
    /// Validation score of every grid point's selection.
    pub grid_scores: Vec<f64>,
    pub winner: usize,
    /// `cqfs` first, then the baselines.
    pub methods: Vec<MethodResult>,
}

pub struct Pipeline {
    cfg: ExperimentConfig,
    out: PathBuf,
    records: Vec<StageRecord>,
    dataset: Option<(String, Dataset)>,
    splits: Option<(String, Splits)>,
    cf: Option<(String, SimilarityModel)>,
    qubos: Option<(String, QuboStage)>,
    selections: Option<(String, Vec<SelectionResult>)>,
    content: Option<(String, ContentStage)>,
    reports: Option<(String, Vec<(String, EvalReport)>)>,
}

fn stage_key(name: &str, params: &Value, upstream: &[&str]) -> String {
    content_hash(&json!({ "stage": name, "params": params, "upstream": upstream }))
}

fn run_stage<T>(
    records: &mut Vec<StageRecord>,
    out: &Path,
    name: &str,
    key: String,
    build: impl FnOnce(&Path) -> Result<T>,
    load: impl FnOnce(&Path) -> Result<T>,
) -> Result<(String, T)> {
    let dir = out.join(name);
    let stamp_path = dir.join("stage.json");
    let start = Instant::now();
    let stamp: Option<StageStamp> = read_json(&stamp_path).ok();
    if stamp.is_some_and(|s| s.key == key) {
        if let Ok(value) = load(&dir) {
            records.push(StageRecord {
                name: name.to_owned(),
                key: key.clone(),
                dir,
                cached: true,
                seconds: start.elapsed().as_secs_f64(),
            });
            return Ok((key, value));
        }
    }
    if dir.exists() {
        fs::remove_dir_all(&dir)?;
    }
    fs::create_dir_all(&dir)?;
    let value = build(&dir)?;
    write_json(
        &stamp_path,
        &StageStamp {
            stage: name.to_owned(),
            key: key.clone(),
        },
    )?;
    records.push(StageRecord {
        name: name.to_owned(),
        key: key.clone(),
        dir,
        cached: false,
        seconds: start.elapsed().as_secs_f64(),
    });
    Ok((key, value))
}

fn method_label(prefix: &str, p: f64) -> String {
    format!("{prefix}_{}", (p * 100.0).round() as i64)
}

fn distinct(values: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.iter().any(|&o| o.to_bits() == v.to_bits()) {
            out.push(v);
        }
    }
    out
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, out: &Path) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline {
            cfg,
            out: out.to_path_buf(),
            records: Vec::new(),
            dataset: None,
            splits: None,
            cf: None,
            qubos: None,
            selections: None,
            content: None,
            reports: None,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.out
    }

    pub fn records(&self) -> &[StageRecord] {
        &self.records
    }

    fn seed(&self, purpose: &str) -> u64 {
        derive_seed(self.cfg.seed, purpose)
    }

    /// Loads (or generates) and filters the dataset.
    pub fn dataset(&mut self) -> Result<(String, Dataset)> {
        if let Some(done) = &self.dataset {
            return Ok(done.clone());
        }
        let cfg = &self.cfg;
        let key = stage_key(
            STAGE_DATASET,
            &json!({ "dataset": cfg.dataset, "preprocess": cfg.preprocess }),
            &[],
        );
        let build = |dir: &Path| -> Result<Dataset> {
            let (raw, planted) = match &cfg.dataset {
                DatasetSource::Synth(sc) => {
                    let p = synth_planted(sc)?;
                    let labels: Vec<String> = p
                        .planted
                        .iter()
                        .map(|&f| p.dataset.feature_ids.label(f).to_owned())
                        .collect();
                    (p.dataset, Some(labels))
                }
                DatasetSource::Files {
                    interactions,
                    item_features,
                    value_mode,
                } => (
                    Dataset::from_records(
                        &load_interactions(interactions, *value_mode)?,
                        &load_item_features(item_features)?,
                    )?,
                    None,
                ),
            };
            let pp = cfg.preprocess;
            let ds = preprocess(
                &raw,
                pp.min_user_interactions,
                pp.min_item_interactions,
                pp.min_feature_items,
            )?;
            ds.save(dir)?;
            if let Some(labels) = planted {
                write_json(&dir.join("planted.json"), &labels)?;
            }
            Ok(ds)
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_DATASET, key, build, Dataset::load)?;
        self.dataset = Some(done.clone());
        Ok(done)
    }

    /// Planted feature indices of a synthetic dataset that survived
    /// preprocessing; `None` for file datasets.
    pub fn planted_features(&mut self) -> Result<Option<Vec<usize>>> {
        let (_, ds) = self.dataset()?;
        let path = self.out.join(STAGE_DATASET).join("planted.json");
        if !path.exists() {
            return Ok(None);
        }
        let labels: Vec<String> = read_json(&path)?;
        let mut idx: Vec<usize> = labels.iter().filter_map(|l| ds.feature_ids.index_of(l)).collect();
        idx.sort_unstable();
        Ok(Some(idx))
    }

    /// Cold item split, then a per-user holdout of the warm training data.
    pub fn splits(&mut self) -> Result<(String, Splits)> {
        if let Some(done) = &self.splits {
            return Ok(done.clone());
        }
        let (up, ds) = self.dataset()?;
        let sp = self.cfg.split;
        let key = stage_key(STAGE_SPLIT, &json!({ "split": sp, "seed": self.cfg.seed }), &[&up]);
        let (cold_seed, holdout_seed) = (self.seed("cold_split"), self.seed("holdout"));
        let build = |dir: &Path| -> Result<Splits> {
            let cold = cold_item_split(&ds.urm, sp.test_quota, sp.validation_quota, cold_seed)?;
            let holdout = user_holdout_split(&cold.train, sp.holdout_quota, holdout_seed)?;
            cold.save(dir)?;
            holdout.train.save_coo(&dir.join("cf_train.coo"))?;
            holdout.validation.save_coo(&dir.join("cf_validation.coo"))?;
            Ok(Splits { cold, holdout })
        };
        let load = |dir: &Path| -> Result<Splits> {
            Ok(Splits {
                cold: ColdSplit::load(dir)?,
                holdout: HoldoutSplit {
                    train: SparseMatrix::load_coo(&dir.join("cf_train.coo"))?,
                    validation: SparseMatrix::load_coo(&dir.join("cf_validation.coo"))?,
                },
            })
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_SPLIT, key, build, load)?;
        self.splits = Some(done.clone());
        Ok(done)
    }

    /// Tunes the collaborative model on the warm holdout and refits the best
    /// configuration on all warm training data.
    pub fn collaborative(&mut self) -> Result<(String, SimilarityModel)> {
        if let Some(done) = &self.cf {
            return Ok(done.clone());
        }
        let (up, splits) = self.splits()?;
        let cfg = &self.cfg;
        let key = stage_key(
            STAGE_CF,
            &json!({
                "collaborative": cfg.collaborative,
                "cutoff": cfg.cutoff,
                "mil_max_pairs": cfg.mil_max_pairs,
                "seed": cfg.seed,
            }),
            &[&up],
        );
        let (model_seed, search_seed, mil_seed) = (self.seed("cf_model"), self.seed("cf_search"), self.seed("mil"));
        let build = |dir: &Path| -> Result<SimilarityModel> {
            let warm = splits.cold.warm_items();
            let task = RankingTask {
                profiles: &splits.holdout.train,
                truth: &splits.holdout.validation,
                candidates: &warm,
                cutoff: cfg.cutoff,
                mil_max_pairs: cfg.mil_max_pairs,
                seed: mil_seed,
            };
            let kind = cfg.collaborative.kind;
            let outcome = random_search(
                &cfg.collaborative.search_space()?,
                cfg.collaborative.n_cases,
                |p| {
                    let m = fit_collaborative(kind, p, &splits.holdout.train, model_seed)?;
                    task.score(&m.s, &cfg.collaborative.metric)
                },
                search_seed,
            )?;
            let model = fit_collaborative(kind, &outcome.best.point, &splits.cold.train, model_seed)?;
            model.save(dir, "model")?;
            write_json(&dir.join("search.json"), &outcome)?;
            write_atomic(&dir.join("search.tsv"), outcome.to_tsv().as_bytes())?;
            Ok(model)
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_CF, key, build, |dir| {
            SimilarityModel::load(dir, "model")
        })?;
        self.cf = Some(done.clone());
        Ok(done)
    }

    /// Content teacher, penalization matrices and one feature penalization
    /// matrix per distinct `(alpha, beta)` of the grid, all on warm items.
    pub fn qubos(&mut self) -> Result<(String, QuboStage)> {
        if let Some(done) = &self.qubos {
            return Ok(done.clone());
        }
        let (up_cf, cf) = self.collaborative()?;
        let (up_split, splits) = self.splits()?;
        let (_, ds) = self.dataset()?;
        let cfg = &self.cfg;
        let key = stage_key(
            STAGE_QUBO,
            &json!({ "cbf_teacher": cfg.cbf_teacher, "cqfs": cfg.cqfs }),
            &[&up_cf, &up_split],
        );
        let build = |dir: &Path| -> Result<QuboStage> {
            let mut warm = vec![false; ds.n_items()];
            for i in splits.cold.warm_items() {
                warm[i] = true;
            }
            let icm_warm = ds.icm.mask_rows(&warm);
            let teacher = item_knn_cbf(&icm_warm, &cfg.cbf_teacher.params(ds.n_items()));
            teacher.save(dir, "cbf_teacher")?;
            let pm = build_penalization(&cf.s, &teacher.s)?;
            pm.k_matrix.save_coo(&dir.join("keep.coo"))?;
            pm.e_matrix.save_coo(&dir.join("eliminate.coo"))?;

            let mut pairs: Vec<(f64, f64)> = Vec::new();
            let mut grid = Vec::new();
            for config in cfg.cqfs.points() {
                let pair = (config.alpha, config.beta);
                let fpm = match pairs.iter().position(|&p| p == pair) {
                    Some(j) => j,
                    None => {
                        pairs.push(pair);
                        pairs.len() - 1
                    }
                };
                grid.push(GridPoint { config, fpm });
            }
            let fpms = pairs
                .iter()
                .map(|&(a, b)| build_fpm(&icm_warm, &build_ipm(&pm, a, b)))
                .collect::<Result<Vec<_>>>()?;
            for (j, fpm) in fpms.iter().enumerate() {
                fpm.save_coo(&dir.join(format!("fpm_{j:03}.coo")))?;
            }
            write_json(&dir.join("grid.json"), &grid)?;
            Ok(QuboStage { grid, fpms })
        };
        let load = |dir: &Path| -> Result<QuboStage> {
            let grid: Vec<GridPoint> = read_json(&dir.join("grid.json"))?;
            let n_fpm = grid.iter().map(|g| g.fpm + 1).max().unwrap_or(0);
            let fpms = (0..n_fpm)
                .map(|j| SparseMatrix::load_coo(&dir.join(format!("fpm_{j:03}.coo"))))
                .collect::<Result<Vec<_>>>()?;
            Ok(QuboStage { grid, fpms })
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_QUBO, key, build, load)?;
        self.qubos = Some(done.clone());
        Ok(done)
    }

    /// Solves the QUBO of every grid point.
    pub fn selections(&mut self) -> Result<(String, Vec<SelectionResult>)> {
        if let Some(done) = &self.selections {
            return Ok(done.clone());
        }
        let (up, qubos) = self.qubos()?;
        let cfg = &self.cfg;
        let key = stage_key(STAGE_SELECT, &json!({ "solver": cfg.solver, "seed": cfg.seed }), &[&up]);
        let seed = self.seed("solver");
        let path = |dir: &Path, i: usize| dir.join(format!("selection_{i:03}.json"));
        let build = |dir: &Path| -> Result<Vec<SelectionResult>> {
            (0..qubos.grid.len())
                .map(|i| {
                    let r = solve_selection(&qubos.qubo(i)?, &cfg.solver, seed)?;
                    r.save(&path(dir, i))?;
                    Ok(r)
                })
                .collect()
        };
        let load = |dir: &Path| -> Result<Vec<SelectionResult>> {
            (0..qubos.grid.len())
                .map(|i| SelectionResult::load(&path(dir, i)))
                .collect()
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_SELECT, key, build, load)?;
        self.selections = Some(done.clone());
        Ok(done)
    }

    /// Picks the grid point whose selection ranks cold validation items best,
    /// then tunes a content-based model on it and on every baseline subset.
    pub fn content(&mut self) -> Result<(String, ContentStage)> {
        if let Some(done) = &self.content {
            return Ok(done.clone());
        }
        let (up_sel, selections) = self.selections()?;
        let (up_split, splits) = self.splits()?;
        let (_, qubos) = self.qubos()?;
        let (_, ds) = self.dataset()?;
        let cfg = &self.cfg;
        let key = stage_key(
            STAGE_CBF,
            &json!({
                "cbf_teacher": cfg.cbf_teacher,
                "cbf_search": cfg.cbf_search,
                "selection_metric": cfg.selection_metric,
                "cutoff": cfg.cutoff,
                "mil_max_pairs": cfg.mil_max_pairs,
                "seed": cfg.seed,
            }),
            &[&up_sel, &up_split],
        );
        let (search_seed, random_seed, mil_seed) =
            (self.seed("cbf_search"), self.seed("random_baseline"), self.seed("mil"));
        let build = |dir: &Path| -> Result<ContentStage> {
            let task = RankingTask {
                profiles: &splits.cold.train,
                truth: &splits.cold.validation,
                candidates: &splits.cold.cold_validation_items,
                cutoff: cfg.cutoff,
                mil_max_pairs: cfg.mil_max_pairs,
                seed: mil_seed,
            };
            let metric = cfg.selection_metric.as_str();
            let chosen: Vec<Vec<usize>> = selections.iter().map(SelectionResult::selected).collect();
            let grid_scores = score_selections(&ds.icm, &chosen, &cfg.cbf_teacher.params(ds.n_items()), &task, metric)?;
            let winner = argmax(&grid_scores).ok_or_else(|| Error::ConfigInvalid("empty cqfs grid".into()))?;

            let n_features = ds.n_features();
            let mut subsets = vec![
                ("cqfs".to_owned(), chosen[winner].clone()),
                ("all_features".to_owned(), (0..n_features).collect()),
            ];
            for p in distinct(qubos.grid.iter().map(|g| g.config.p)) {
                subsets.push((method_label("tfidf", p), baseline_tfidf_selection(&ds.icm, p)?));
                subsets.push((
                    method_label("random", p),
                    baseline_random_selection(n_features, p, random_seed)?,
                ));
            }
            let space = cfg.cbf_search.search_space();
            let mut methods = Vec::with_capacity(subsets.len());
            for (name, features) in subsets {
                let icm = restrict_features(&ds.icm, &features);
                let outcome: SearchOutcome = random_search(
                    &space,
                    cfg.cbf_search.n_cases,
                    |p| task.score(&fit_content(p, &icm)?.s, metric),
                    search_seed,
                )?;
                write_atomic(&dir.join(format!("search_{name}.tsv")), outcome.to_tsv().as_bytes())?;
                if name == "cqfs" {
                    fit_content(&outcome.best.point, &icm)?.save(dir, "model")?;
                }
                methods.push(MethodResult {
                    name,
                    features,
                    params: outcome.best.point,
                    validation_score: outcome.best.score,
                });
            }
            let stage = ContentStage {
                grid_scores,
                winner,
                methods,
            };
            write_json(&dir.join("content.json"), &stage)?;
            Ok(stage)
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_CBF, key, build, |dir| {
            read_json(&dir.join("content.json"))
        })?;
        self.content = Some(done.clone());
        Ok(done)
    }

    /// Refits every tuned content-based model and evaluates it on the cold
    /// test items, with user profiles from training plus validation data.
    pub fn reports(&mut self) -> Result<(String, Vec<(String, EvalReport)>)> {
        if let Some(done) = &self.reports {
            return Ok(done.clone());
        }
        let (up, content) = self.content()?;
        let (_, splits) = self.splits()?;
        let (_, selections) = self.selections()?;
        let (_, qubos) = self.qubos()?;
        let (_, ds) = self.dataset()?;
        let cfg = &self.cfg;
        let key = stage_key(
            STAGE_REPORTS,
            &json!({ "cutoff": cfg.cutoff, "mil_max_pairs": cfg.mil_max_pairs, "seed": cfg.seed }),
            &[&up],
        );
        let mil_seed = self.seed("mil");
        let build = |dir: &Path| -> Result<Vec<(String, EvalReport)>> {
            let profiles = splits.cold.train.add(&splits.cold.validation)?;
            let task = RankingTask {
                profiles: &profiles,
                truth: &splits.cold.test,
                candidates: &splits.cold.cold_test_items,
                cutoff: cfg.cutoff,
                mil_max_pairs: cfg.mil_max_pairs,
                seed: mil_seed,
            };
            let mut reports = Vec::new();
            let mut summary = format!("method\tn_features\t{}\n", EvalReport::tsv_header());
            for m in &content.methods {
                let model = fit_content(&m.params, &restrict_features(&ds.icm, &m.features))?;
                let report = task.report(&model.s)?;
                report.save(dir, &m.name)?;
                summary.push_str(&format!("{}\t{}\t{}\n", m.name, m.features.len(), report.tsv_row()));
                reports.push((m.name.clone(), report));
            }
            write_atomic(&dir.join("summary.tsv"), summary.as_bytes())?;

            let mut grid = format!(
                "index\talpha\tbeta\ts\tp\tn_selected\tenergy\tvalidation_{}\n",
                cfg.selection_metric
            );
            for (i, (g, sel)) in qubos.grid.iter().zip(&selections).enumerate() {
                let c = g.config;
                grid.push_str(&format!(
                    "{i}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.10}\n",
                    c.alpha,
                    c.beta,
                    c.s,
                    c.p,
                    sel.n_selected(),
                    sel.energy,
                    content.grid_scores[i]
                ));
            }
            write_atomic(&dir.join("grid.tsv"), grid.as_bytes())?;

            let winner = &qubos.grid[content.winner];
            let chosen = &content.methods[0];
            write_json(
                &dir.join("selection.json"),
                &json!({
                    "grid_index": content.winner,
                    "config": winner.config,
                    "energy": selections[content.winner].energy,
                    "validation_score": content.grid_scores[content.winner],
                    "features": chosen.features,
                    "feature_labels": chosen.features.iter().map(|&f| ds.feature_ids.label(f)).collect::<Vec<_>>(),
                    "cbf_params": chosen.params,
                }),
            )?;

            let all: Vec<Vec<usize>> = selections.iter().map(SelectionResult::selected).collect();
            let stats = feature_selection_stats(&all, ds.n_features())?;
            let tsv = feature_stats_tsv(&stats, |f| ds.feature_ids.label(f).to_owned());
            write_atomic(&dir.join("feature_stats.tsv"), tsv.as_bytes())?;
            Ok(reports)
        };
        let load = |dir: &Path| -> Result<Vec<(String, EvalReport)>> {
            content
                .methods
                .iter()
                .map(|m| Ok((m.name.clone(), EvalReport::load(dir, &m.name)?)))
                .collect()
        };
        let done = run_stage(&mut self.records, &self.out, STAGE_REPORTS, key, build, load)?;
        self.reports = Some(done.clone());
        Ok(done)
    }

    /// Runs every stage and writes `<out>/run.json`.
    pub fn run(&mut self) -> Result<PipelineRun> {
        self.reports()?;
        self.finish()
    }

    /// Writes `<out>/run.json` for the stages executed so far.
    pub fn finish(&self) -> Result<PipelineRun> {
        let run = PipelineRun {
            config_hash: content_hash(&self.cfg),
            output_dir: self.out.clone(),
            stages: self.records.clone(),
        };
        write_json(&self.out.join("run.json"), &run)?;
        Ok(run)
    }
}

/// Runs the whole pipeline for `cfg` into its configured output directory.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineRun> {
    with_workers(cfg.workers, || Pipeline::new(cfg.clone(), &cfg.output_dir)?.run())
}

/// Runs `f` on a dedicated thread pool of `workers` threads, or on the
/// global pool when `None`.
pub fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::ConfigInvalid(format!("cannot start {n} workers: {e}")))?
            .install(f),
    }
}
