//! Dense from-scratch reference implementations used by the integration tests.

#![allow(dead_code)]

use cqfs_core::dataio::SynthConfig;
use cqfs_core::pipeline::config::{DatasetSource, ExperimentConfig};
use cqfs_core::pipeline::search::{Distribution, Parameter};
use cqfs_core::sparse::SparseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub type Dense = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random matrix with small integer entries in `0..=max`, about `density` nonzero.
pub fn random_int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64, max: u32) -> Dense {
    (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random::<f64>() < density {
                        rng.random_range(1..=max) as f64
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn transpose(a: &Dense) -> Dense {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|row| (0..cols).map(|j| (0..inner).map(|k| row[k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn max_abs_diff(a: &Dense, b: &Dense) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

pub fn frobenius_diff(a: &Dense, b: &Dense) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)))
        .sum::<f64>()
        .sqrt()
}

/// `Σ_i Σ_j ICM_if · ICM_jg · IPM_ij` entry by entry.
pub fn fpm_triple_sum(icm: &Dense, ipm: &Dense) -> Dense {
    let items = icm.len();
    let features = icm.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; features]; features];
    for (f, row) in out.iter_mut().enumerate() {
        for (g, cell) in row.iter_mut().enumerate() {
            let mut total = 0.0;
            for i in 0..items {
                for j in 0..items {
                    total += icm[i][f] * icm[j][g] * ipm[i][j];
                }
            }
            *cell = total;
        }
    }
    out
}

/// Row-wise top-k of a dense similarity after dropping the diagonal and
/// entries with magnitude at most 1e-12. Ties go to the smaller column.
pub fn top_k_dense(s: &Dense, k: usize) -> Dense {
    s.iter()
        .enumerate()
        .map(|(i, row)| {
            let mut entries: Vec<(usize, f64)> = row
                .iter()
                .enumerate()
                .filter(|&(j, v)| j != i && v.abs() > 1e-12)
                .map(|(j, &v)| (j, v))
                .collect();
            entries.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            entries.truncate(k);
            let mut out = vec![0.0; row.len()];
            for (j, v) in entries {
                out[j] = v;
            }
            out
        })
        .collect()
}

/// Cosine between rows `a·b / (‖a‖‖b‖ + shrink)`, or the plain dot product.
pub fn cosine_dense(vectors: &Dense, shrink: f64, normalize: bool) -> Dense {
    let n = vectors.len();
    let norm = |r: &Vec<f64>| r.iter().map(|v| v * v).sum::<f64>().sqrt();
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| {
                    let dot: f64 = vectors[i].iter().zip(&vectors[j]).map(|(a, b)| a * b).sum();
                    if normalize {
                        dot / (norm(&vectors[i]) * norm(&vectors[j]) + shrink)
                    } else {
                        dot
                    }
                })
                .collect()
        })
        .collect()
}

fn l1_rows(a: &Dense) -> Dense {
    a.iter()
        .map(|row| {
            let total: f64 = row.iter().map(|v| v.abs()).sum();
            if total > 0.0 {
                row.iter().map(|v| v / total).collect()
            } else {
                row.clone()
            }
        })
        .collect()
}

/// Random-walk item similarity `P_iu^α · P_ui^α` with column `j` divided by
/// `pop(j)^β`, diagonal kept.
pub fn rp3beta_dense(urm: &Dense, alpha: f64, beta: f64) -> Dense {
    let pow = |m: Dense| -> Dense {
        m.into_iter()
            .map(|r| {
                r.into_iter()
                    .map(|v| if v == 0.0 { 0.0 } else { v.powf(alpha) })
                    .collect()
            })
            .collect()
    };
    let p_ui = pow(l1_rows(urm));
    let p_iu = pow(l1_rows(&transpose(urm)));
    let walk = matmul(&p_iu, &p_ui);
    let pop: Vec<usize> = transpose(urm)
        .iter()
        .map(|col| col.iter().filter(|v| **v != 0.0).count())
        .collect();
    walk.into_iter()
        .map(|row| {
            row.into_iter()
                .enumerate()
                .map(|(j, v)| {
                    if pop[j] == 0 || beta == 0.0 {
                        v
                    } else {
                        v / (pop[j] as f64).powf(beta)
                    }
                })
                .collect()
        })
        .collect()
}

/// Full ranking by `profile · S`; seen items optionally skipped, only
/// `candidates` eligible, ties to the smaller item index.
pub fn rank_dense(
    s: &Dense,
    profiles: &Dense,
    cutoff: usize,
    exclude_seen: bool,
    candidates: &[usize],
) -> Vec<Vec<usize>> {
    profiles
        .iter()
        .map(|p| {
            let scores: Vec<f64> = (0..s.len())
                .map(|j| (0..s.len()).map(|i| p[i] * s[i][j]).sum())
                .collect();
            let mut eligible: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&j| !(exclude_seen && p[j] != 0.0))
                .collect();
            eligible.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap().then(a.cmp(&b)));
            eligible.truncate(cutoff);
            eligible
        })
        .collect()
}

/// One-sided Jacobi SVD of a tall matrix (`rows ≥ cols`): returns `(U, σ, V)`
/// with singular values in descending order.
pub fn jacobi_svd(a: &Dense) -> (Dense, Vec<f64>, Dense) {
    let m = a.len();
    let n = a[0].len();
    assert!(m >= n, "expects a tall matrix");
    let mut u = a.clone();
    let mut v: Dense = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for row in &u {
                    alpha += row[p] * row[p];
                    beta += row[q] * row[q];
                    gamma += row[p] * row[q];
                }
                if gamma == 0.0 || gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sign = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sign / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in u.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
                for row in v.iter_mut() {
                    let (x, y) = (row[p], row[q]);
                    row[p] = c * x - s * y;
                    row[q] = s * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma: Vec<f64> = (0..n)
        .map(|j| u.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let u_sorted: Dense = u
        .iter()
        .map(|r| {
            order
                .iter()
                .map(|&j| if sigma[j] > 0.0 { r[j] / sigma[j] } else { 0.0 })
                .collect()
        })
        .collect();
    let v_sorted: Dense = v.iter().map(|r| order.iter().map(|&j| r[j]).collect()).collect();
    (u_sorted, order.iter().map(|&j| sigma[j]).collect(), v_sorted)
}

/// `U·diag(σ)·Vᵀ` using the leading `k` triplets.
pub fn svd_reconstruct(u: &Dense, sigma: &[f64], v: &Dense, k: usize) -> Dense {
    let m = u.len();
    let n = v.len();
    (0..m)
        .map(|i| {
            (0..n)
                .map(|j| (0..k).map(|r| u[i][r] * sigma[r] * v[j][r]).sum())
                .collect()
        })
        .collect()
}

pub fn to_sparse(a: &Dense) -> SparseMatrix {
    SparseMatrix::from_dense(a)
}

pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Dense {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// A pipeline configuration small enough to run in a few seconds.
pub fn small_config(seed: u64, workers: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::synthetic(seed);
    cfg.dataset = DatasetSource::Synth(SynthConfig {
        n_users: 80,
        n_items: 60,
        n_features: 14,
        n_relevant: 4,
        interactions_per_user: 12,
        ..SynthConfig::reference(seed)
    });
    cfg.collaborative.n_cases = 3;
    cfg.collaborative.space = Some(vec![
        Parameter::new("topK", Distribution::IntUniform { low: 5, high: 30 }),
        Parameter::new("shrink", Distribution::IntUniform { low: 0, high: 10 }),
        Parameter::new(
            "normalize",
            Distribution::Categorical {
                values: vec![Value::from(true)],
            },
        ),
        Parameter::new(
            "weighting",
            Distribution::Categorical {
                values: vec![Value::from("none")],
            },
        ),
    ]);
    cfg.cqfs.beta = vec![1.0, 1e-2];
    cfg.cqfs.s = vec![1.0, 1e3];
    cfg.cqfs.p = vec![0.4, 0.8];
    cfg.solver.num_samples = 10;
    cfg.cbf_search.n_cases = 3;
    cfg.workers = Some(workers);
    cfg
}
