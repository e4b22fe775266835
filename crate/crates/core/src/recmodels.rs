//! Item-item similarity recommenders and ranking.
//!
//! All models produce an item x item similarity `S`; user scores are the
//! product of the user profile with `S`.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::sparse::{Norm, SparseMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "ItemKNN_CF")]
    ItemKnnCf,
    #[serde(rename = "ItemKNN_CBF")]
    ItemKnnCbf,
    #[serde(rename = "PureSVD")]
    PureSvd,
    #[serde(rename = "RP3Beta")]
    Rp3Beta,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ModelKind::ItemKnnCf => "ItemKNN_CF",
            ModelKind::ItemKnnCbf => "ItemKNN_CBF",
            ModelKind::PureSvd => "PureSVD",
            ModelKind::Rp3Beta => "RP3Beta",
        };
        f.write_str(name)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    #[default]
    None,
    #[serde(rename = "tfidf")]
    TfIdf,
    #[serde(rename = "bm25")]
    Bm25,
}

/// Hyperparameters that produced a similarity; absent fields do not apply.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kind: ModelKind,
    #[serde(rename = "topK", skip_serializing_if = "Option::is_none", default)]
    pub top_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub shrink: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub normalize: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub weighting: Option<Weighting>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub num_factors: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl Hyperparams {
    fn of(kind: ModelKind) -> Self {
        Hyperparams {
            kind,
            top_k: None,
            shrink: None,
            normalize: None,
            weighting: None,
            num_factors: None,
            alpha: None,
            beta: None,
            seed: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityModel {
    pub s: SparseMatrix,
    pub hyperparams: Hyperparams,
}

impl SimilarityModel {
    pub fn kind(&self) -> ModelKind {
        self.hyperparams.kind
    }

    pub fn n_items(&self) -> usize {
        self.s.n_rows()
    }

    pub fn recommend(
        &self,
        profiles: &SparseMatrix,
        cutoff: usize,
        exclude_seen: bool,
        candidates: Option<&[usize]>,
    ) -> Result<Vec<Vec<usize>>> {
        score_and_rank(&self.s, profiles, cutoff, exclude_seen, candidates)
    }

    /// Writes `{stem}.coo` and the `{stem}.json` hyperparameter sidecar.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.s.save_coo(&dir.join(format!("{stem}.coo")))?;
        write_json(&dir.join(format!("{stem}.json")), &self.hyperparams)
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        Ok(SimilarityModel {
            s: SparseMatrix::load_coo(&dir.join(format!("{stem}.coo")))?,
            hyperparams: read_json(&dir.join(format!("{stem}.json")))?,
        })
    }
}

/// Cosine (or plain dot product) similarity between the rows of `vectors`.
///
/// With `normalize` the similarity is `a·b / (‖a‖‖b‖ + shrink)`; without it
/// the dot product is used and `shrink` is ignored. The diagonal is removed
/// before keeping the `top_k` largest values per row.
pub fn cosine_knn(vectors: &SparseMatrix, top_k: usize, shrink: f64, normalize: bool) -> SparseMatrix {
    assert!(top_k >= 1, "top_k must be positive");
    let gram = vectors
        .matmul(&vectors.transpose())
        .expect("gram matrix dimensions agree");
    let sims = if normalize {
        let norms: Vec<f64> = (0..vectors.n_rows())
            .map(|r| vectors.row(r).1.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        gram.map_values(|i, j, dot| dot / (norms[i] * norms[j] + shrink))
    } else {
        gram
    };
    sims.without_diagonal().top_k_per_row(top_k)
}

const BM25_K1: f64 = 1.2;
const BM25_B: f64 = 0.75;

/// Re-weights a document x term matrix (items x features, or items x users
/// for collaborative vectors). Stored values act as term frequencies.
pub fn apply_feature_weighting(m: &SparseMatrix, scheme: Weighting) -> SparseMatrix {
    let n_docs = m.n_rows() as f64;
    let df = m.col_nnz();
    match scheme {
        Weighting::None => m.clone(),
        Weighting::TfIdf => {
            let idf: Vec<f64> = df.iter().map(|&d| idf_plain(n_docs, d)).collect();
            m.map_values(|_, c, v| v * idf[c])
        }
        Weighting::Bm25 => {
            let idf: Vec<f64> = df
                .iter()
                .map(|&d| ((n_docs - d as f64 + 0.5) / (d as f64 + 0.5) + 1.0).ln())
                .collect();
            let lengths = m.row_sums();
            let avg_len = if lengths.is_empty() {
                0.0
            } else {
                lengths.iter().sum::<f64>() / lengths.len() as f64
            };
            m.map_values(|r, c, tf| {
                let rel_len = if avg_len > 0.0 { lengths[r] / avg_len } else { 0.0 };
                idf[c] * tf * (BM25_K1 + 1.0) / (tf + BM25_K1 * (1.0 - BM25_B + BM25_B * rel_len))
            })
        }
    }
}

fn idf_plain(n_docs: f64, df: usize) -> f64 {
    if df == 0 {
        0.0
    } else {
        (n_docs / df as f64).ln()
    }
}

/// Non-negative per-feature weights.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureWeights(pub Vec<f64>);

impl FeatureWeights {
    /// Indices of the `n` highest weights, ties to the smaller index, sorted ascending.
    pub fn top(&self, n: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.0.len()).collect();
        order.sort_by(|&a, &b| self.0[b].total_cmp(&self.0[a]).then(a.cmp(&b)));
        order.truncate(n);
        order.sort_unstable();
        order
    }
}

/// `ln(|I| / df_f)` per feature; unused features score 0.
pub fn tfidf_feature_scores(icm: &SparseMatrix) -> FeatureWeights {
    let n_items = icm.n_rows() as f64;
    FeatureWeights(icm.col_nnz().into_iter().map(|d| idf_plain(n_items, d)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnParams {
    #[serde(rename = "topK")]
    pub top_k: usize,
    pub shrink: f64,
    pub normalize: bool,
    pub weighting: Weighting,
}

impl KnnParams {
    fn hyperparams(&self, kind: ModelKind) -> Hyperparams {
        Hyperparams {
            top_k: Some(self.top_k),
            shrink: Some(self.shrink),
            normalize: Some(self.normalize),
            weighting: Some(self.weighting),
            ..Hyperparams::of(kind)
        }
    }
}

/// Collaborative ItemKNN: items are compared through their user columns.
pub fn item_knn_cf(urm: &SparseMatrix, params: &KnnParams) -> SimilarityModel {
    let item_vectors = apply_feature_weighting(&urm.transpose(), params.weighting);
    SimilarityModel {
        s: cosine_knn(&item_vectors, params.top_k, params.shrink, params.normalize),
        hyperparams: params.hyperparams(ModelKind::ItemKnnCf),
    }
}

/// Content-based ItemKNN on (optionally weighted) item features.
pub fn item_knn_cbf(icm: &SparseMatrix, params: &KnnParams) -> SimilarityModel {
    let item_vectors = apply_feature_weighting(icm, params.weighting);
    SimilarityModel {
        s: cosine_knn(&item_vectors, params.top_k, params.shrink, params.normalize),
        hyperparams: params.hyperparams(ModelKind::ItemKnnCbf),
    }
}

/// Rank-k factors `A ≈ U·diag(sigma)·Vᵀ`, singular values descending.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let mut us = self.u.clone();
        for (j, s) in self.sigma.iter().enumerate() {
            us.column_mut(j).scale_mut(*s);
        }
        us * self.v.transpose()
    }
}

const SVD_OVERSAMPLING: usize = 10;
const SVD_POWER_ITERATIONS: usize = 7;

fn sparse_times_dense(a: &SparseMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(a.n_cols(), x.nrows());
    let cols = x.ncols();
    let rows: Vec<Vec<f64>> = (0..a.n_rows())
        .into_par_iter()
        .map(|r| {
            let mut out = vec![0.0; cols];
            let (idx, vals) = a.row(r);
            for (&k, &v) in idx.iter().zip(vals) {
                for (j, o) in out.iter_mut().enumerate() {
                    *o += v * x[(k, j)];
                }
            }
            out
        })
        .collect();
    DMatrix::from_fn(a.n_rows(), cols, |i, j| rows[i][j])
}

fn orthonormal_basis(y: DMatrix<f64>) -> DMatrix<f64> {
    y.qr().q()
}

/// Randomized subspace iteration with 10 oversampling columns and 7 power
/// iterations, re-orthonormalized at every half step.
pub fn truncated_svd(a: &SparseMatrix, k: usize, seed: u64) -> Result<TruncatedSvd> {
    let (m, n) = a.shape();
    let max = m.min(n);
    if k == 0 || k > max {
        return Err(Error::RankTooLarge { requested: k, max });
    }
    let l = (k + SVD_OVERSAMPLING).min(max);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(n, l, |_, _| StandardNormal.sample(&mut rng));
    let at = a.transpose();

    let mut q = orthonormal_basis(sparse_times_dense(a, &omega));
    for _ in 0..SVD_POWER_ITERATIONS {
        let z = orthonormal_basis(sparse_times_dense(&at, &q));
        q = orthonormal_basis(sparse_times_dense(a, &z));
    }
    // B = Qᵀ A, computed as (Aᵀ Q)ᵀ
    let b = sparse_times_dense(&at, &q).transpose();
    let svd = b.svd(true, true);
    let ub = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested Vᵀ");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .total_cmp(&svd.singular_values[i])
            .then(i.cmp(&j))
    });
    order.truncate(k);
    let u_small = DMatrix::from_fn(ub.nrows(), k, |i, j| ub[(i, order[j])]);
    let v = DMatrix::from_fn(n, k, |i, j| vt[(order[j], i)]);
    Ok(TruncatedSvd {
        u: q * u_small,
        sigma: order.iter().map(|&i| svd.singular_values[i]).collect(),
        v,
    })
}

/// PureSVD folded into an item-item similarity `V·Vᵀ` without its diagonal.
pub fn pure_svd(urm: &SparseMatrix, num_factors: usize, seed: u64) -> Result<SimilarityModel> {
    let svd = truncated_svd(urm, num_factors, seed)?;
    let vvt = &svd.v * svd.v.transpose();
    let n = vvt.nrows();
    let flat: Vec<f64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| vvt[(i, j)])
        .collect();
    let s = SparseMatrix::from_dense_flat(n, n, &flat).without_diagonal();
    Ok(SimilarityModel {
        s,
        hyperparams: Hyperparams {
            num_factors: Some(num_factors),
            seed: Some(seed),
            ..Hyperparams::of(ModelKind::PureSvd)
        },
    })
}

/// Item-to-item random-walk similarity with popularity penalization.
///
/// Both transition matrices are raised to `alpha` before the product, column
/// `j` is divided by `pop(j)^beta`, the diagonal is removed, the top `top_k`
/// neighbours per row are kept and rows are optionally L1-normalized.
pub fn rp3beta(urm: &SparseMatrix, alpha: f64, beta: f64, top_k: usize, normalize: bool) -> Result<SimilarityModel> {
    let s = rp3beta_similarity(urm, alpha, beta)?
        .without_diagonal()
        .top_k_per_row(top_k);
    let s = if normalize { s.row_normalize(Norm::L1) } else { s };
    Ok(SimilarityModel {
        s,
        hyperparams: Hyperparams {
            top_k: Some(top_k),
            alpha: Some(alpha),
            beta: Some(beta),
            normalize: Some(normalize),
            ..Hyperparams::of(ModelKind::Rp3Beta)
        },
    })
}

/// The un-pruned walk similarity including its diagonal.
pub fn rp3beta_similarity(urm: &SparseMatrix, alpha: f64, beta: f64) -> Result<SparseMatrix> {
    let p_ui = urm.row_normalize(Norm::L1).elementwise_pow(alpha)?;
    let p_iu = urm.transpose().row_normalize(Norm::L1).elementwise_pow(alpha)?;
    let popularity = urm.col_nnz();
    let walk = p_iu.matmul(&p_ui)?;
    Ok(walk.map_values(|_, j, v| {
        let pop = popularity[j];
        if pop == 0 || beta == 0.0 {
            v
        } else {
            v / (pop as f64).powf(beta)
        }
    }))
}

/// Ranks items for every user by `profiles · S`.
///
/// Only `candidates` are eligible when given; seen items are skipped when
/// `exclude_seen`. Ties, including users whose scores are all zero, go to the
/// smaller item index.
pub fn score_and_rank(
    s: &SparseMatrix,
    profiles: &SparseMatrix,
    cutoff: usize,
    exclude_seen: bool,
    candidates: Option<&[usize]>,
) -> Result<Vec<Vec<usize>>> {
    if profiles.n_cols() != s.n_rows() || s.n_rows() != s.n_cols() {
        return Err(Error::DimensionMismatch {
            op: "score_and_rank",
            left: profiles.shape(),
            right: s.shape(),
        });
    }
    let n_items = s.n_cols();
    let eligible: Vec<usize> = match candidates {
        Some(c) => {
            let mut c = c.to_vec();
            c.sort_unstable();
            c.dedup();
            if let Some(&bad) = c.iter().find(|&&i| i >= n_items) {
                return Err(Error::IndexOutOfRange {
                    row: 0,
                    col: bad,
                    n_rows: 1,
                    n_cols: n_items,
                });
            }
            c
        }
        None => (0..n_items).collect(),
    };
    let lists = (0..profiles.n_rows())
        .into_par_iter()
        .map_init(
            || (vec![0.0f64; n_items], vec![false; n_items]),
            |(scores, seen), u| {
                let (items, weights) = profiles.row(u);
                for (&i, &w) in items.iter().zip(weights) {
                    let (cols, vals) = s.row(i);
                    for (&j, &v) in cols.iter().zip(vals) {
                        scores[j] += w * v;
                    }
                    if exclude_seen {
                        seen[i] = true;
                    }
                }
                let mut ranked: Vec<(f64, usize)> = eligible
                    .iter()
                    .filter(|&&j| !seen[j])
                    .map(|&j| (scores[j], j))
                    .collect();
                let by_score = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
                if ranked.len() > cutoff {
                    if cutoff > 0 {
                        ranked.select_nth_unstable_by(cutoff - 1, by_score);
                    }
                    ranked.truncate(cutoff);
                }
                ranked.sort_by(by_score);
                for &i in items {
                    seen[i] = false;
                    for &j in s.row(i).0 {
                        scores[j] = 0.0;
                    }
                }
                ranked.into_iter().map(|(_, j)| j).collect()
            },
        )
        .collect();
    Ok(lists)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix::from_dense(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn cosine_examples() {
        let v = m(&[&[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        let s = cosine_knn(&v, 10, 0.0, true);
        assert!((s.get(0, 1) - 0.5).abs() < 1e-15);
        assert_eq!(s.get(0, 0), 0.0);
        let s = cosine_knn(&v, 10, 1.0, true);
        assert!((s.get(0, 1) - 1.0 / 3.0).abs() < 1e-15);
        let s = cosine_knn(&v, 10, 5.0, false);
        assert_eq!(s.get(0, 1), 1.0);

        let same = m(&[&[2.0, 0.0, 1.0], &[2.0, 0.0, 1.0]]);
        let s = cosine_knn(&same, 10, 0.0, true);
        assert!((s.get(0, 1) - 1.0).abs() < 1e-15);
        assert_eq!(s.get(1, 1), 0.0);
    }

    #[test]
    fn zero_vectors_give_zero_rows() {
        let v = m(&[&[0.0, 0.0], &[1.0, 1.0]]);
        let s = cosine_knn(&v, 5, 0.0, true);
        assert_eq!(s.nnz(), 0);
    }

    #[test]
    fn tfidf_weighting_examples() {
        let icm = m(&[&[1.0, 1.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let w = apply_feature_weighting(&icm, Weighting::TfIdf);
        assert!((w.get(0, 0) - 4f64.ln()).abs() < 1e-12);
        assert!((w.get(0, 0) - 1.3863).abs() < 1e-4);
        for i in 0..4 {
            assert_eq!(w.get(i, 1), 0.0);
        }
        assert_eq!(apply_feature_weighting(&icm, Weighting::None), icm);
    }

    #[test]
    fn bm25_binary_formula() {
        let icm = m(&[&[1.0, 1.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let w = apply_feature_weighting(&icm, Weighting::Bm25);
        let avg_len = 5.0 / 4.0;
        let idf0 = ((4.0f64 - 1.0 + 0.5) / 1.5 + 1.0).ln();
        let expected = idf0 * 2.2 / (1.0 + 1.2 * (0.25 + 0.75 * 2.0 / avg_len));
        assert!((w.get(0, 0) - expected).abs() < 1e-12);
        assert!(w.values().iter().all(|v| *v > 0.0));
    }

    #[test]
    fn tfidf_scores_prefer_rare_features() {
        let icm = m(&[&[1.0, 1.0], &[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]]);
        let scores = tfidf_feature_scores(&icm);
        assert_eq!(scores.0[1], 0.0);
        assert_eq!(scores.top(1), vec![0]);
        let empty = m(&[&[0.0, 1.0]]);
        assert_eq!(tfidf_feature_scores(&empty).0, vec![0.0, 0.0]);
    }

    #[test]
    fn rank_one_svd_similarity() {
        let u = [1.0, 2.0, -1.0, 0.5];
        let v = [3.0, 0.0, 4.0];
        let mut t = Vec::new();
        for (i, a) in u.iter().enumerate() {
            for (j, b) in v.iter().enumerate() {
                t.push((i, j, a * b));
            }
        }
        let r = SparseMatrix::from_triplets(4, 3, t).unwrap();
        let model = pure_svd(&r, 1, 42).unwrap();
        let norm = 5.0;
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 0.0 } else { v[i] * v[j] / (norm * norm) };
                assert!((model.s.get(i, j) - expected).abs() < 1e-10, "({i},{j})");
            }
        }
        assert!(matches!(pure_svd(&r, 4, 0), Err(Error::RankTooLarge { .. })));
    }

    #[test]
    fn rp3beta_rows_are_stochastic() {
        let urm = m(&[
            &[1.0, 1.0, 0.0, 0.0],
            &[0.0, 1.0, 1.0, 0.0],
            &[1.0, 0.0, 0.0, 1.0],
            &[0.0, 0.0, 1.0, 1.0],
            &[1.0, 1.0, 1.0, 0.0],
        ]);
        let s = rp3beta_similarity(&urm, 1.0, 0.0).unwrap();
        for sum in s.row_sums() {
            assert!((sum - 1.0).abs() < 1e-12);
        }
        let empty = rp3beta(&SparseMatrix::zeros(3, 4), 1.0, 0.5, 10, true).unwrap();
        assert_eq!(empty.s.nnz(), 0);
    }

    #[test]
    fn ranking_examples() {
        let s = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let profile = m(&[&[1.0, 0.0]]);
        assert_eq!(score_and_rank(&s, &profile, 1, false, None).unwrap(), vec![vec![1]]);

        let both = m(&[&[1.0, 1.0]]);
        assert_eq!(
            score_and_rank(&s, &both, 1, true, None).unwrap(),
            vec![Vec::<usize>::new()]
        );
        let empty_profile = SparseMatrix::zeros(1, 2);
        assert_eq!(
            score_and_rank(&s, &empty_profile, 2, true, Some(&[1, 0])).unwrap(),
            vec![vec![0, 1]]
        );
        assert!(score_and_rank(&s, &SparseMatrix::zeros(1, 3), 1, false, None).is_err());
    }

    #[test]
    fn sidecar_uses_top_k_key() {
        let model = item_knn_cbf(
            &m(&[&[1.0, 0.0], &[1.0, 1.0]]),
            &KnnParams {
                top_k: 5,
                shrink: 0.0,
                normalize: true,
                weighting: Weighting::Bm25,
            },
        );
        let json = serde_json::to_value(&model.hyperparams).unwrap();
        assert_eq!(json["kind"], "ItemKNN_CBF");
        assert_eq!(json["topK"], 5);
        assert_eq!(json["weighting"], "bm25");
        assert!(json.get("alpha").is_none());
    }
}
