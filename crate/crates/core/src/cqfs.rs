//! Feature-selection QUBO construction.
//!
//! Item pairs are compared through a collaborative and a content-based
//! similarity. Pairs similar in both go to the keep matrix `K` (value −1),
//! pairs similar only by content go to the eliminate matrix `E` (value +1).
//! The item penalization `αK + βE` is projected onto features through the
//! item content matrix, and a soft cardinality penalty `s·(Σx − k)²` is added.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_json, write_json};
use crate::sparse::{SparseMatrix, ZERO_EPSILON};

#[derive(Clone, Debug, PartialEq)]
pub struct PenalizationMatrices {
    /// Pairs to keep, values −1.
    pub k_matrix: SparseMatrix,
    /// Pairs to eliminate, values +1.
    pub e_matrix: SparseMatrix,
}

/// Classifies every unordered item pair by the sign pattern of the two
/// symmetrized similarities. Only values above [`ZERO_EPSILON`] count as
/// present, so negative similarities are treated as absent.
pub fn build_penalization(s_cf: &SparseMatrix, s_cbf: &SparseMatrix) -> Result<PenalizationMatrices> {
    if s_cf.shape() != s_cbf.shape() || s_cf.n_rows() != s_cf.n_cols() {
        return Err(Error::DimensionMismatch {
            op: "build_penalization",
            left: s_cf.shape(),
            right: s_cbf.shape(),
        });
    }
    let cf = s_cf.symmetrize_max()?;
    let cbf = s_cbf.symmetrize_max()?;
    let mut keep = Vec::new();
    let mut eliminate = Vec::new();
    for (i, j, v) in cbf.iter() {
        if i == j || v <= ZERO_EPSILON {
            continue;
        }
        if cf.get(i, j) > ZERO_EPSILON {
            keep.push((i, j, -1.0));
        } else {
            eliminate.push((i, j, 1.0));
        }
    }
    let n = cf.n_rows();
    Ok(PenalizationMatrices {
        k_matrix: SparseMatrix::from_triplets(n, n, keep)?,
        e_matrix: SparseMatrix::from_triplets(n, n, eliminate)?,
    })
}

/// `IPM = αK + βE`.
pub fn build_ipm(pm: &PenalizationMatrices, alpha: f64, beta: f64) -> SparseMatrix {
    pm.k_matrix
        .scale(alpha)
        .add(&pm.e_matrix.scale(beta))
        .expect("K and E share a shape")
}

/// `FPM = ICMᵀ · IPM · ICM`.
pub fn build_fpm(icm: &SparseMatrix, ipm: &SparseMatrix) -> Result<SparseMatrix> {
    if ipm.n_rows() != ipm.n_cols() || ipm.n_cols() != icm.n_rows() {
        return Err(Error::DimensionMismatch {
            op: "build_fpm",
            left: icm.shape(),
            right: ipm.shape(),
        });
    }
    icm.transpose().matmul(ipm)?.matmul(icm)
}

/// Hyperparameters of one QUBO instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CqfsConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Share of features to select.
    pub p: f64,
    /// Strength of the cardinality penalty.
    pub s: f64,
}

impl CqfsConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.alpha > 0.0
            && self.alpha.is_finite()
            && self.beta >= 0.0
            && self.beta.is_finite()
            && self.p > 0.0
            && self.p <= 1.0
            && self.s >= 0.0
            && self.s.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!(
                "need alpha > 0, beta >= 0, p in (0, 1], s >= 0; got {self:?}"
            )))
        }
    }

    /// Target feature count `p·|F|`, kept real-valued.
    pub fn k_target(&self, n_features: usize) -> f64 {
        self.p * n_features as f64
    }
}

/// Dense symmetric QUBO. The energy is `xᵀQx + offset`, so each off-diagonal
/// pair contributes twice.
#[derive(Clone, Debug, PartialEq)]
pub struct QuboProblem {
    n: usize,
    q: Vec<f64>,
    pub offset: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuboSidecar {
    n: usize,
    offset: f64,
    convention: String,
}

impl QuboProblem {
    pub fn zeros(n: usize) -> Self {
        QuboProblem {
            n,
            q: vec![0.0; n * n],
            offset: 0.0,
        }
    }

    /// Row-major `n x n` coefficients; must be exactly symmetric and finite.
    pub fn from_dense(n: usize, q: Vec<f64>, offset: f64) -> Result<Self> {
        if q.len() != n * n {
            return Err(Error::DimensionMismatch {
                op: "qubo",
                left: (n, n),
                right: (q.len(), 1),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = q[i * n + j];
                if !v.is_finite() || v != q[j * n + i] {
                    return Err(Error::InfeasibleConfig(format!(
                        "QUBO coefficient ({i}, {j}) is not finite and symmetric"
                    )));
                }
            }
        }
        if !offset.is_finite() {
            return Err(Error::InfeasibleConfig("QUBO offset is not finite".into()));
        }
        Ok(QuboProblem { n, q, offset })
    }

    /// Symmetrizes `(m + mᵀ)/2` from a square sparse matrix.
    pub fn from_sparse(m: &SparseMatrix, offset: f64) -> Result<Self> {
        let sym = m.symmetrize_mean()?;
        let n = sym.n_rows();
        let mut q = vec![0.0; n * n];
        for (i, j, v) in sym.iter() {
            q[i * n + j] = v;
        }
        // the two triangles are computed as (a+b)/2 and (b+a)/2, which agree bit for bit
        QuboProblem::from_dense(n, q, offset)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.q[i * self.n..(i + 1) * self.n]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.q
    }

    pub fn add(&self, other: &QuboProblem) -> Result<QuboProblem> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                op: "qubo add",
                left: (self.n, self.n),
                right: (other.n, other.n),
            });
        }
        Ok(QuboProblem {
            n: self.n,
            q: self.q.iter().zip(&other.q).map(|(a, b)| a + b).collect(),
            offset: self.offset + other.offset,
        })
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.q.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_nonzero_abs_coefficient(&self) -> Option<f64> {
        self.q
            .iter()
            .map(|v| v.abs())
            .filter(|&v| v > 0.0)
            .min_by(|a, b| a.total_cmp(b))
    }

    /// Upper-triangular form `(i, j, value)` with `i <= j`, where
    /// off-diagonal values are doubled so that `Σ U_ij x_i x_j` gives the
    /// same energy.
    pub fn to_upper_triangular(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in i..self.n {
                let v = if i == j { self.get(i, i) } else { 2.0 * self.get(i, j) };
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn from_upper_triangular(n: usize, entries: &[(usize, usize, f64)], offset: f64) -> Result<Self> {
        let mut q = vec![0.0; n * n];
        for &(i, j, v) in entries {
            if i >= n || j >= n {
                return Err(Error::IndexOutOfRange {
                    row: i,
                    col: j,
                    n_rows: n,
                    n_cols: n,
                });
            }
            let (a, b) = if i <= j { (i, j) } else { (j, i) };
            if a == b {
                q[a * n + a] += v;
            } else {
                q[a * n + b] += 0.5 * v;
                q[b * n + a] += 0.5 * v;
            }
        }
        QuboProblem::from_dense(n, q, offset)
    }

    pub fn to_sparse(&self) -> SparseMatrix {
        SparseMatrix::from_dense_flat(self.n, self.n, &self.q)
    }

    /// Writes `{stem}.coo` with the symmetric coefficients and a `{stem}.json`
    /// sidecar holding `n`, `offset` and the convention.
    pub fn save(&self, dir: &Path, stem: &str) -> Result<()> {
        self.to_sparse().save_coo(&dir.join(format!("{stem}.coo")))?;
        write_json(
            &dir.join(format!("{stem}.json")),
            &QuboSidecar {
                n: self.n,
                offset: self.offset,
                convention: "symmetric".into(),
            },
        )
    }

    pub fn load(dir: &Path, stem: &str) -> Result<Self> {
        let sidecar_path = dir.join(format!("{stem}.json"));
        let sidecar: QuboSidecar = read_json(&sidecar_path)?;
        if sidecar.convention != "symmetric" {
            return Err(Error::Artifact {
                path: sidecar_path,
                message: format!("unsupported convention {:?}", sidecar.convention),
            });
        }
        let m = SparseMatrix::load_coo(&dir.join(format!("{stem}.coo")))?;
        if m.shape() != (sidecar.n, sidecar.n) {
            return Err(Error::Artifact {
                path: sidecar_path,
                message: "coefficient matrix does not match n".into(),
            });
        }
        let mut q = vec![0.0; sidecar.n * sidecar.n];
        for (i, j, v) in m.iter() {
            q[i * sidecar.n + j] = v;
        }
        QuboProblem::from_dense(sidecar.n, q, sidecar.offset)
    }
}

/// `s·(Σx − k)²` expanded with `x_f² = x_f`: diagonal `s(1 − 2k)`, every
/// off-diagonal entry `s`, offset `s·k²`.
pub fn combination_penalty(n: usize, k_target: f64, s: f64) -> QuboProblem {
    let diag = s * (1.0 - 2.0 * k_target);
    let mut q = vec![s; n * n];
    for i in 0..n {
        q[i * n + i] = diag;
    }
    QuboProblem {
        n,
        q,
        offset: s * k_target * k_target,
    }
}

/// Smallest penalty scale above which every single-flip local minimum of
/// `xᵀ FPM x + s·(Σx − k)²` selects exactly `round(k)` features.
///
/// Moving one step towards `round(k)` lowers the penalty by at least
/// `s·(1 − 2d)`, `d = |round(k) − k|`, while the quadratic part changes by at
/// most `max_f (|q_ff| + 2·Σ_{g≠f} |q_fg|)`. Returns `None` when `k` sits
/// halfway between two integers.
pub fn local_cardinality_penalty(fpm: &QuboProblem, k_target: f64) -> Option<f64> {
    let d = (k_target.round() - k_target).abs();
    let margin = 1.0 - 2.0 * d;
    if margin <= 1e-12 {
        return None;
    }
    let n = fpm.n;
    let swing = (0..n)
        .map(|f| {
            let row = &fpm.q[f * n..(f + 1) * n];
            row.iter().map(|v| 2.0 * v.abs()).sum::<f64>() - row[f].abs()
        })
        .fold(0.0, f64::max);
    Some(swing / margin)
}

/// Final objective `xᵀ FPM x + s·(Σx − p|F|)²` as a symmetric QUBO.
pub fn assemble_qubo(fpm: &SparseMatrix, cfg: &CqfsConfig) -> Result<QuboProblem> {
    cfg.validate()?;
    if fpm.n_rows() != fpm.n_cols() {
        return Err(Error::DimensionMismatch {
            op: "assemble_qubo",
            left: fpm.shape(),
            right: fpm.shape(),
        });
    }
    let n = fpm.n_rows();
    let base = QuboProblem::from_sparse(fpm, 0.0)?;
    base.add(&combination_penalty(n, cfg.k_target(n), cfg.s))
}

/// All stages from the two similarities to the QUBO.
pub fn build_qubo(
    s_cf: &SparseMatrix,
    s_cbf: &SparseMatrix,
    icm: &SparseMatrix,
    cfg: &CqfsConfig,
) -> Result<QuboProblem> {
    let pm = build_penalization(s_cf, s_cbf)?;
    let fpm = build_fpm(icm, &build_ipm(&pm, cfg.alpha, cfg.beta))?;
    assemble_qubo(&fpm, cfg)
}
