//! Interaction and feature ingestion, preprocessing filters, the cold-item and
//! per-user holdout splits, and a synthetic generator with planted features.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, read_text, write_atomic, write_json};
use crate::sparse::SparseMatrix;

/// Bijection between original labels and dense indices `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct IdMap {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for IdMap {
    fn from(labels: Vec<String>) -> Self {
        let index = labels.iter().enumerate().map(|(i, l)| (l.clone(), i)).collect();
        IdMap { labels, index }
    }
}

impl From<IdMap> for Vec<String> {
    fn from(map: IdMap) -> Self {
        map.labels
    }
}

impl IdMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Labels `{prefix}0 .. {prefix}{n-1}`.
    pub fn sequential(prefix: &str, n: usize) -> Self {
        (0..n).map(|i| format!("{prefix}{i}")).collect::<Vec<_>>().into()
    }

    pub fn get_or_insert(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        i
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Keeps the listed indices, renumbered in order.
    pub fn select(&self, keep: &[usize]) -> IdMap {
        keep.iter().map(|&i| self.labels[i].clone()).collect::<Vec<_>>().into()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    /// Users x items, values are interaction strengths.
    pub urm: SparseMatrix,
    /// Items x features, binary.
    pub icm: SparseMatrix,
    pub user_ids: IdMap,
    pub item_ids: IdMap,
    pub feature_ids: IdMap,
}

impl Dataset {
    pub fn new(
        urm: SparseMatrix,
        icm: SparseMatrix,
        user_ids: IdMap,
        item_ids: IdMap,
        feature_ids: IdMap,
    ) -> Result<Self> {
        if urm.n_cols() != icm.n_rows() {
            return Err(Error::DimensionMismatch {
                op: "dataset",
                left: urm.shape(),
                right: icm.shape(),
            });
        }
        if user_ids.len() != urm.n_rows() || item_ids.len() != urm.n_cols() || feature_ids.len() != icm.n_cols() {
            return Err(Error::InfeasibleConfig("id maps do not match matrix dimensions".into()));
        }
        if icm.values().iter().any(|&v| v != 1.0) {
            return Err(Error::InfeasibleConfig("item content matrix must be binary".into()));
        }
        if urm.values().iter().any(|&v| v <= 0.0) {
            return Err(Error::InfeasibleConfig("interaction values must be positive".into()));
        }
        Ok(Dataset {
            urm,
            icm,
            user_ids,
            item_ids,
            feature_ids,
        })
    }

    pub fn n_users(&self) -> usize {
        self.urm.n_rows()
    }

    pub fn n_items(&self) -> usize {
        self.urm.n_cols()
    }

    pub fn n_features(&self) -> usize {
        self.icm.n_cols()
    }

    /// Assembles a dataset from raw labelled records. Items are indexed in
    /// order of first appearance, interactions first, so items that only
    /// appear in the feature file are kept as well.
    pub fn from_records(interactions: &[Interaction], item_features: &[(String, String)]) -> Result<Self> {
        let mut users = IdMap::new();
        let mut items = IdMap::new();
        let mut features = IdMap::new();
        let mut urm_triplets = Vec::with_capacity(interactions.len());
        for it in interactions {
            let u = users.get_or_insert(&it.user);
            let i = items.get_or_insert(&it.item);
            urm_triplets.push((u, i, it.value));
        }
        let mut icm_triplets = Vec::with_capacity(item_features.len());
        for (item, feature) in item_features {
            let i = items.get_or_insert(item);
            let f = features.get_or_insert(feature);
            icm_triplets.push((i, f, 1.0));
        }
        let urm = SparseMatrix::from_triplets(users.len(), items.len(), urm_triplets)?;
        // repeated (item, feature) lines collapse to one binary entry
        let icm = SparseMatrix::from_triplets(items.len(), features.len(), icm_triplets)?.map_values(|_, _, _| 1.0);
        Dataset::new(urm, icm, users, items, features)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.urm.save_coo(&dir.join("urm.coo"))?;
        self.icm.save_coo(&dir.join("icm.coo"))?;
        write_json(
            &dir.join("ids.json"),
            &DatasetIds {
                users: self.user_ids.clone(),
                items: self.item_ids.clone(),
                features: self.feature_ids.clone(),
            },
        )
    }

    /// Writes the dataset in the text formats read by [`load_interactions`]
    /// and [`load_item_features`].
    pub fn export_tsv(&self, interactions: &Path, item_features: &Path) -> Result<()> {
        let mut text = String::new();
        for (u, i, v) in self.urm.iter() {
            text.push_str(&format!(
                "{}\t{}\t{}\n",
                self.user_ids.label(u),
                self.item_ids.label(i),
                v
            ));
        }
        write_atomic(interactions, text.as_bytes())?;
        let mut text = String::new();
        for (i, f, _) in self.icm.iter() {
            text.push_str(&format!("{}\t{}\n", self.item_ids.label(i), self.feature_ids.label(f)));
        }
        write_atomic(item_features, text.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let urm = SparseMatrix::load_coo(&dir.join("urm.coo"))?;
        let icm = SparseMatrix::load_coo(&dir.join("icm.coo"))?;
        let ids: DatasetIds = read_json(&dir.join("ids.json"))?;
        Dataset::new(urm, icm, ids.users, ids.items, ids.features)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetIds {
    users: IdMap,
    items: IdMap,
    features: IdMap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValueMode {
    Explicit,
    ImplicitBinary,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Interaction {
    pub user: String,
    pub item: String,
    pub value: f64,
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

pub fn parse_interactions(text: &str, mode: ValueMode, path: &Path) -> Result<Vec<Interaction>> {
    let mut out = Vec::new();
    for (line_no, line) in data_lines(text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("expected 2 or 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let value = match fields.get(2) {
            Some(raw) => raw.trim().parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                message: format!("bad value {raw:?}: {e}"),
            })?,
            None => 1.0,
        };
        if value < 0.0 {
            return Err(Error::NegativeValue {
                path: path.to_path_buf(),
                line: line_no,
                value,
            });
        }
        out.push(Interaction {
            user: fields[0].to_owned(),
            item: fields[1].to_owned(),
            value: match mode {
                ValueMode::Explicit => value,
                ValueMode::ImplicitBinary => 1.0,
            },
        });
    }
    Ok(out)
}

/// Reads `user\titem[\tvalue]` lines; `#` lines are comments.
pub fn load_interactions(path: &Path, mode: ValueMode) -> Result<Vec<Interaction>> {
    let text = read_text(path)?;
    parse_interactions(&text, mode, path)
}

pub fn parse_item_features(text: &str, path: &Path) -> Result<Vec<(String, String)>> {
    data_lines(text)
        .map(|(line_no, line)| {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    message: format!("expected item<TAB>feature, found {} fields", fields.len()),
                });
            }
            Ok((fields[0].to_owned(), fields[1].to_owned()))
        })
        .collect()
}

/// Reads `item\tfeature` lines.
pub fn load_item_features(path: &Path) -> Result<Vec<(String, String)>> {
    let text = read_text(path)?;
    parse_item_features(&text, path)
}

/// Iteratively drops users and items with too few interactions and features
/// carried by too few items, until nothing changes.
pub fn preprocess(
    ds: &Dataset,
    min_user_interactions: usize,
    min_item_interactions: usize,
    min_feature_items: usize,
) -> Result<Dataset> {
    let mut keep_users = vec![true; ds.n_users()];
    let mut keep_items = vec![true; ds.n_items()];
    let mut keep_features = vec![true; ds.n_features()];
    loop {
        let urm = ds.urm.mask_rows(&keep_users).mask_cols(&keep_items);
        let icm = ds.icm.mask_rows(&keep_items).mask_cols(&keep_features);
        let mut changed = false;
        for (u, keep) in keep_users.iter_mut().enumerate() {
            if *keep && urm.row_nnz(u) < min_user_interactions {
                *keep = false;
                changed = true;
            }
        }
        for (i, n) in urm.col_nnz().into_iter().enumerate() {
            if keep_items[i] && n < min_item_interactions {
                keep_items[i] = false;
                changed = true;
            }
        }
        for (f, n) in icm.col_nnz().into_iter().enumerate() {
            if keep_features[f] && n < min_feature_items {
                keep_features[f] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    let users: Vec<usize> = (0..ds.n_users()).filter(|&u| keep_users[u]).collect();
    let items: Vec<usize> = (0..ds.n_items()).filter(|&i| keep_items[i]).collect();
    let features: Vec<usize> = (0..ds.n_features()).filter(|&f| keep_features[f]).collect();
    let urm = ds.urm.submatrix(&users, &items);
    if users.is_empty() || items.is_empty() || urm.nnz() == 0 {
        return Err(Error::EmptyDataset);
    }
    let icm = ds.icm.submatrix(&items, &features);
    Dataset::new(
        urm,
        icm,
        ds.user_ids.select(&users),
        ds.item_ids.select(&items),
        ds.feature_ids.select(&features),
    )
}

/// Item-wise split: test and validation hold whole item columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ColdSplit {
    pub train: SparseMatrix,
    pub validation: SparseMatrix,
    pub test: SparseMatrix,
    pub cold_validation_items: Vec<usize>,
    pub cold_test_items: Vec<usize>,
    pub meta: SplitMeta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitMeta {
    pub seed: u64,
    pub test_quota: f64,
    pub validation_quota: f64,
    pub cold_test_items: Vec<usize>,
    pub cold_validation_items: Vec<usize>,
}

impl ColdSplit {
    /// Items in neither cold pool.
    pub fn warm_items(&self) -> Vec<usize> {
        let mut cold = vec![false; self.train.n_cols()];
        for &i in self.cold_test_items.iter().chain(&self.cold_validation_items) {
            cold[i] = true;
        }
        (0..cold.len()).filter(|&i| !cold[i]).collect()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.train.save_coo(&dir.join("train.coo"))?;
        self.validation.save_coo(&dir.join("validation.coo"))?;
        self.test.save_coo(&dir.join("test.coo"))?;
        write_json(&dir.join("split.json"), &self.meta)
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let meta: SplitMeta = read_json(&dir.join("split.json"))?;
        Ok(ColdSplit {
            train: SparseMatrix::load_coo(&dir.join("train.coo"))?,
            validation: SparseMatrix::load_coo(&dir.join("validation.coo"))?,
            test: SparseMatrix::load_coo(&dir.join("test.coo"))?,
            cold_validation_items: meta.cold_validation_items.clone(),
            cold_test_items: meta.cold_test_items.clone(),
            meta,
        })
    }
}

fn check_quota(name: &str, q: f64) -> Result<()> {
    if !(0.0..1.0).contains(&q) {
        return Err(Error::QuotaInfeasible(format!("{name} = {q} is outside [0, 1)")));
    }
    Ok(())
}

/// Draws random items into the test pool until it holds at least
/// `test_quota` of all interactions, then into the validation pool until that
/// holds `validation_quota` more; the remaining items stay in train.
pub fn cold_item_split(urm: &SparseMatrix, test_quota: f64, validation_quota: f64, seed: u64) -> Result<ColdSplit> {
    check_quota("test_quota", test_quota)?;
    check_quota("validation_quota", validation_quota)?;
    let warm_share = 1.0 - test_quota - validation_quota;
    if warm_share <= 0.0 {
        return Err(Error::QuotaInfeasible(format!(
            "test_quota + validation_quota = {} must be below 1",
            test_quota + validation_quota
        )));
    }
    let counts = urm.col_nnz();
    let total = urm.nnz() as f64;
    if let Some((item, &n)) = counts.iter().enumerate().max_by_key(|(_, &n)| n) {
        if n as f64 > warm_share * total {
            return Err(Error::QuotaInfeasible(format!(
                "item {item} alone holds {n} of {total} interactions"
            )));
        }
    }

    let mut order: Vec<usize> = (0..urm.n_cols()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut draws = order.into_iter();
    let mut fill = |quota: f64| {
        let target = quota * total;
        let mut pool = Vec::new();
        let mut acc = 0usize;
        while (acc as f64) < target {
            match draws.next() {
                Some(item) => {
                    acc += counts[item];
                    pool.push(item);
                }
                None => break,
            }
        }
        pool.sort_unstable();
        pool
    };
    let cold_test_items = fill(test_quota);
    let cold_validation_items = fill(validation_quota);

    let mut pool_of = vec![0u8; urm.n_cols()];
    for &i in &cold_test_items {
        pool_of[i] = 2;
    }
    for &i in &cold_validation_items {
        pool_of[i] = 1;
    }
    let split = |p: u8| urm.filter(|_, c, _| pool_of[c] == p);
    Ok(ColdSplit {
        train: split(0),
        validation: split(1),
        test: split(2),
        meta: SplitMeta {
            seed,
            test_quota,
            validation_quota,
            cold_test_items: cold_test_items.clone(),
            cold_validation_items: cold_validation_items.clone(),
        },
        cold_validation_items,
        cold_test_items,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HoldoutSplit {
    pub train: SparseMatrix,
    pub validation: SparseMatrix,
}

/// Moves `floor(quota * n_u)` random interactions of every user to validation.
pub fn user_holdout_split(m: &SparseMatrix, quota: f64, seed: u64) -> Result<HoldoutSplit> {
    check_quota("holdout quota", quota)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![false; m.nnz()];
    let mut offset = 0;
    for u in 0..m.n_rows() {
        let n = m.row_nnz(u);
        let take = (quota * n as f64 + 1e-9).floor() as usize;
        if take > 0 {
            for pos in index::sample(&mut rng, n, take) {
                held[offset + pos] = true;
            }
        }
        offset += n;
    }
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (k, (r, c, v)) in m.iter().enumerate() {
        if held[k] {
            validation.push((r, c, v));
        } else {
            train.push((r, c, v));
        }
    }
    Ok(HoldoutSplit {
        train: SparseMatrix::from_triplets(m.n_rows(), m.n_cols(), train)?,
        validation: SparseMatrix::from_triplets(m.n_rows(), m.n_cols(), validation)?,
    })
}

/// Parameters of the planted-feature generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_features: usize,
    pub n_relevant: usize,
    pub interactions_per_user: usize,
    pub noise_rate: f64,
    #[serde(default = "default_extra_features")]
    pub extra_features_mean: f64,
    pub seed: u64,
}

fn default_extra_features() -> f64 {
    0.5
}

impl SynthConfig {
    /// 200 users, 150 items, 40 features with 8 relevant, 30 interactions per
    /// user and 10% noise.
    pub fn reference(seed: u64) -> Self {
        SynthConfig {
            n_users: 200,
            n_items: 150,
            n_features: 40,
            n_relevant: 8,
            interactions_per_user: 30,
            noise_rate: 0.1,
            extra_features_mean: default_extra_features(),
            seed,
        }
    }
}

/// Output of [`synth_planted`].
#[derive(Clone, Debug)]
pub struct PlantedDataset {
    pub dataset: Dataset,
    /// Sorted indices of the planted (relevant) features.
    pub planted: Vec<usize>,
    /// Preferred planted feature of every user.
    pub preferred: Vec<usize>,
}

/// Generates a dataset whose interactions are driven by a few planted features.
///
/// Every item carries exactly one planted feature plus a Poisson number of
/// non-planted ones. Every user prefers one planted feature; a `noise_rate`
/// share of their interactions (rounded) is drawn uniformly over all items and
/// the rest from items carrying the preferred feature, without repetition
/// until that pool is exhausted. Repeated draws add to the interaction
/// strength.
pub fn synth_planted(cfg: &SynthConfig) -> Result<PlantedDataset> {
    let infeasible = |msg: &str| Err(Error::InfeasibleConfig(msg.to_owned()));
    if cfg.n_users == 0 || cfg.n_items == 0 || cfg.n_features == 0 {
        return infeasible("users, items and features must be non-zero");
    }
    if cfg.n_relevant == 0 || cfg.n_relevant > cfg.n_features {
        return infeasible("n_relevant must lie in 1..=n_features");
    }
    if cfg.n_relevant > cfg.n_items {
        return infeasible("every planted feature needs at least one item");
    }
    if cfg.interactions_per_user == 0 {
        return infeasible("interactions_per_user must be positive");
    }
    if !(0.0..=1.0).contains(&cfg.noise_rate) {
        return infeasible("noise_rate must lie in [0, 1]");
    }
    if !(cfg.extra_features_mean >= 0.0 && cfg.extra_features_mean.is_finite()) {
        return infeasible("extra_features_mean must be finite and non-negative");
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut planted: Vec<usize> = index::sample(&mut rng, cfg.n_features, cfg.n_relevant).into_vec();
    planted.sort_unstable();
    let mut is_planted = vec![false; cfg.n_features];
    for &f in &planted {
        is_planted[f] = true;
    }
    let others: Vec<usize> = (0..cfg.n_features).filter(|&f| !is_planted[f]).collect();

    // a random subset of items covers every planted feature once, the rest draw uniformly
    let mut item_order: Vec<usize> = (0..cfg.n_items).collect();
    item_order.shuffle(&mut rng);
    let mut relevant_of = vec![0usize; cfg.n_items];
    for (k, &item) in item_order.iter().enumerate() {
        relevant_of[item] = if k < cfg.n_relevant {
            planted[k]
        } else {
            planted[rng.random_range(0..cfg.n_relevant)]
        };
    }

    let poisson = if cfg.extra_features_mean > 0.0 {
        Some(Poisson::new(cfg.extra_features_mean).expect("validated rate"))
    } else {
        None
    };
    let mut icm_triplets = Vec::new();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); cfg.n_features];
    for item in 0..cfg.n_items {
        icm_triplets.push((item, relevant_of[item], 1.0));
        pools[relevant_of[item]].push(item);
        let extra = poisson.map_or(0, |p| p.sample(&mut rng) as usize).min(others.len());
        for k in index::sample(&mut rng, others.len(), extra) {
            icm_triplets.push((item, others[k], 1.0));
        }
    }

    let n_noise = (cfg.noise_rate * cfg.interactions_per_user as f64).round() as usize;
    let n_signal = cfg.interactions_per_user - n_noise;
    let mut preferred = Vec::with_capacity(cfg.n_users);
    let mut urm_triplets = Vec::with_capacity(cfg.n_users * cfg.interactions_per_user);
    for user in 0..cfg.n_users {
        let feature = planted[rng.random_range(0..cfg.n_relevant)];
        preferred.push(feature);
        let mut pool = pools[feature].clone();
        let mut drawn = 0;
        while drawn < n_signal {
            pool.shuffle(&mut rng);
            for &item in pool.iter().take(n_signal - drawn) {
                urm_triplets.push((user, item, 1.0));
                drawn += 1;
            }
        }
        for _ in 0..n_noise {
            urm_triplets.push((user, rng.random_range(0..cfg.n_items), 1.0));
        }
    }

    let urm = SparseMatrix::from_triplets(cfg.n_users, cfg.n_items, urm_triplets)?;
    let icm = SparseMatrix::from_triplets(cfg.n_items, cfg.n_features, icm_triplets)?;
    let dataset = Dataset::new(
        urm,
        icm,
        IdMap::sequential("u", cfg.n_users),
        IdMap::sequential("i", cfg.n_items),
        IdMap::sequential("f", cfg.n_features),
    )?;
    Ok(PlantedDataset {
        dataset,
        planted,
        preferred,
    })
}

/// Path helper shared by the pipeline and the CLI.
pub fn dataset_dir(out: &Path) -> PathBuf {
    out.join("dataset")
}
