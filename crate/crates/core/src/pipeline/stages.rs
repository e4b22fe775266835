//! Building blocks shared by the staged pipeline, the command line and the
//! tests: model fitting from search points, validation scoring and feature
//! selection from a solved QUBO.

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{SolverChoice, SolverConfig};
use super::search::{get_as, get_bool, get_f64, get_usize, Point};
use crate::cqfs::QuboProblem;
use crate::error::{Error, Result};
use crate::metrics::{accuracy_metrics, evaluate, EvalReport};
use crate::recmodels::{item_knn_cbf, item_knn_cf, pure_svd, rp3beta, KnnParams, ModelKind, SimilarityModel};
use crate::solvers::{default_schedule, solve_exhaustive, solve_sa, SelectionResult, SolverKind};
use crate::sparse::SparseMatrix;

/// Independent seed for a named purpose, so that adding a consumer of
/// randomness does not shift the streams of the others.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let digest = Sha256::new()
        .chain_update(seed.to_le_bytes())
        .chain_update(purpose.as_bytes())
        .finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

/// Hex SHA-256 of the canonical JSON form of `value`.
pub fn content_hash<T: serde::Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("hashable values serialize");
    hex::encode(Sha256::digest(bytes))
}

/// ItemKNN parameters from a search point; `topK` is capped at the catalog
/// size.
pub fn knn_params_from_point(point: &Point, n_items: usize) -> Result<KnnParams> {
    Ok(KnnParams {
        top_k: get_usize(point, "topK")?.clamp(1, n_items.max(1)),
        shrink: get_f64(point, "shrink")?,
        normalize: get_bool(point, "normalize")?,
        weighting: match point.get("weighting") {
            Some(_) => get_as(point, "weighting")?,
            None => Default::default(),
        },
    })
}

/// Fits a collaborative model of `kind` on `urm` with the parameters in
/// `point`.
pub fn fit_collaborative(kind: ModelKind, point: &Point, urm: &SparseMatrix, seed: u64) -> Result<SimilarityModel> {
    let n_items = urm.n_cols();
    match kind {
        ModelKind::ItemKnnCf => Ok(item_knn_cf(urm, &knn_params_from_point(point, n_items)?)),
        ModelKind::PureSvd => {
            let max = urm.n_rows().min(n_items);
            pure_svd(urm, get_usize(point, "num_factors")?.clamp(1, max.max(1)), seed)
        }
        ModelKind::Rp3Beta => rp3beta(
            urm,
            get_f64(point, "alpha")?,
            get_f64(point, "beta")?,
            get_usize(point, "topK")?.clamp(1, n_items.max(1)),
            get_bool(point, "normalize")?,
        ),
        ModelKind::ItemKnnCbf => Err(Error::ConfigInvalid("ItemKNN_CBF is not a collaborative model".into())),
    }
}

/// Content-based ItemKNN on `icm` with the parameters in `point`.
pub fn fit_content(point: &Point, icm: &SparseMatrix) -> Result<SimilarityModel> {
    Ok(item_knn_cbf(icm, &knn_params_from_point(point, icm.n_rows())?))
}

/// Per-user item lists of a users × items matrix.
pub fn relevant_lists(m: &SparseMatrix) -> Vec<Vec<usize>> {
    (0..m.n_rows()).map(|u| m.row(u).0.to_vec()).collect()
}

/// Ranking task: score `candidates` for every user from `profiles` and
/// compare with the items in `truth`.
#[derive(Clone, Copy, Debug)]
pub struct RankingTask<'a> {
    pub profiles: &'a SparseMatrix,
    pub truth: &'a SparseMatrix,
    pub candidates: &'a [usize],
    pub cutoff: usize,
    pub mil_max_pairs: usize,
    pub seed: u64,
}

impl RankingTask<'_> {
    /// Recommended and relevant item lists per user.
    #[allow(clippy::type_complexity)]
    fn lists(&self, s: &SparseMatrix) -> Result<(Vec<Vec<usize>>, Vec<Vec<usize>>)> {
        let recommended = crate::recmodels::score_and_rank(s, self.profiles, self.cutoff, true, Some(self.candidates))?;
        Ok((recommended, relevant_lists(self.truth)))
    }

    pub fn report(&self, s: &SparseMatrix) -> Result<EvalReport> {
        let (recommended, relevant) = self.lists(s)?;
        evaluate(
            &recommended,
            &relevant,
            self.candidates,
            self.cutoff,
            self.mil_max_pairs,
            self.seed,
        )
    }

    /// A single metric; accuracy metrics skip the beyond-accuracy work.
    pub fn score(&self, s: &SparseMatrix, metric: &str) -> Result<f64> {
        let (recommended, relevant) = self.lists(s)?;
        let acc = accuracy_metrics(&recommended, &relevant, self.cutoff)?;
        let value = match metric {
            "precision" => Some(acc.precision),
            "recall" => Some(acc.recall),
            "ndcg" => Some(acc.ndcg),
            "map" => Some(acc.map),
            _ => None,
        };
        match value {
            Some(v) => Ok(v),
            None => evaluate(
                &recommended,
                &relevant,
                self.candidates,
                self.cutoff,
                self.mil_max_pairs,
                self.seed,
            )?
            .metric(metric)
            .ok_or_else(|| Error::ConfigInvalid(format!("unknown metric {metric:?}"))),
        }
    }
}

/// Keeps only the columns of `selected` features.
pub fn restrict_features(icm: &SparseMatrix, selected: &[usize]) -> SparseMatrix {
    let mut keep = vec![false; icm.n_cols()];
    for &f in selected {
        keep[f] = true;
    }
    icm.mask_cols(&keep)
}

/// Solves `q` with the configured solver and returns the best assignment.
///
/// When no coefficient is positive every added feature can only lower the
/// energy, so the all-ones vector is optimal and returned directly.
pub fn solve_selection(q: &QuboProblem, solver: &SolverConfig, seed: u64) -> Result<SelectionResult> {
    let kind = match solver.kind {
        SolverChoice::Exhaustive => SolverKind::Exhaustive,
        SolverChoice::Sa => SolverKind::SimulatedAnnealing,
    };
    if q.coefficients().iter().all(|&v| v <= 0.0) {
        let x = vec![1u8; q.n()];
        return Ok(SelectionResult {
            energy: crate::solvers::energy(q, &x)?,
            x,
            solver: kind,
            seed,
            samples_drawn: 0,
            wall_time: 0.0,
        });
    }
    match solver.kind {
        SolverChoice::Exhaustive => solve_exhaustive(q),
        SolverChoice::Sa => {
            let schedule = solver.schedule.unwrap_or_else(|| default_schedule(q.n())).scaled_for(q);
            let mut samples = solve_sa(q, &schedule, solver.num_samples, seed)?;
            Ok(samples.swap_remove(0))
        }
    }
}

/// Index of the largest score, ties and NaN to the earlier entry.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if s > scores[b] || (scores[b].is_nan() && !s.is_nan()) => best = Some(i),
            _ => {}
        }
    }
    best
}

/// Validation score of the content-based model on each feature subset, all
/// fitted with the same parameters.
pub fn score_selections(
    icm: &SparseMatrix,
    selections: &[Vec<usize>],
    params: &KnnParams,
    task: &RankingTask<'_>,
    metric: &str,
) -> Result<Vec<f64>> {
    selections
        .par_iter()
        .map(|sel| task.score(&item_knn_cbf(&restrict_features(icm, sel), params).s, metric))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn derived_seeds_differ_by_purpose() {
        assert_eq!(derive_seed(1, "a"), derive_seed(1, "a"));
        assert_ne!(derive_seed(1, "a"), derive_seed(1, "b"));
        assert_ne!(derive_seed(1, "a"), derive_seed(2, "a"));
        assert_eq!(content_hash(&[1, 2]).len(), 64);
    }

    #[test]
    fn knn_params_are_capped() {
        let mut p = Point::new();
        p.insert("topK".into(), Value::from(900));
        p.insert("shrink".into(), Value::from(3));
        p.insert("normalize".into(), Value::from(true));
        p.insert("weighting".into(), Value::from("bm25"));
        let k = knn_params_from_point(&p, 40).unwrap();
        assert_eq!(k.top_k, 40);
        assert_eq!(k.shrink, 3.0);
        assert_eq!(k.weighting, crate::recmodels::Weighting::Bm25);
        p.remove("normalize");
        assert!(knn_params_from_point(&p, 40).is_err());
    }

    #[test]
    fn non_positive_qubo_selects_everything() {
        let q = QuboProblem::from_dense(2, vec![0.0, -1.0, -1.0, -2.0], 0.0).unwrap();
        let r = solve_selection(&q, &SolverConfig::default(), 0).unwrap();
        assert_eq!(r.x, vec![1, 1]);
        assert_eq!(r.energy, -4.0);
        let zero = solve_selection(&QuboProblem::zeros(3), &SolverConfig::default(), 0).unwrap();
        assert_eq!(zero.x, vec![1, 1, 1]);
    }

    #[test]
    fn exhaustive_and_sa_agree_on_small_problem() {
        let q = QuboProblem::from_dense(3, vec![-1.0, 2.0, 0.0, 2.0, -1.0, 0.0, 0.0, 0.0, -0.5], 0.0).unwrap();
        let exact = solve_selection(
            &q,
            &SolverConfig {
                kind: SolverChoice::Exhaustive,
                ..SolverConfig::default()
            },
            0,
        )
        .unwrap();
        let sa = solve_selection(&q, &SolverConfig::default(), 0).unwrap();
        assert_eq!(exact.x, vec![1, 0, 1]);
        assert_eq!(sa.energy, exact.energy);
    }

    #[test]
    fn argmax_ties_to_first() {
        assert_eq!(argmax(&[]), None);
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), Some(1));
        assert_eq!(argmax(&[f64::NAN, 0.5]), Some(1));
    }

    #[test]
    fn restrict_drops_other_columns() {
        let icm = SparseMatrix::from_dense(&[vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0]]);
        let r = restrict_features(&icm, &[1]);
        assert_eq!(r.to_dense(), vec![vec![0.0, 1.0, 0.0], vec![0.0, 1.0, 0.0]]);
    }
}
