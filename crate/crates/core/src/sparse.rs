//! Row-compressed sparse matrices.
//!
//! Every constructor and operation leaves the matrix canonical: column indices
//! strictly increasing within a row, no duplicate coordinates and no stored
//! value with magnitude below [`ZERO_EPSILON`].

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Stored values with a smaller magnitude are treated as structural zeros.
pub const ZERO_EPSILON: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

#[inline]
fn is_zero(v: f64) -> bool {
    v.abs() < ZERO_EPSILON
}

impl SparseMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        SparseMatrix {
            n_rows,
            n_cols,
            indptr: vec![0; n_rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        SparseMatrix {
            n_rows: n,
            n_cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds a matrix from coordinate triplets, summing duplicates.
    pub fn from_triplets<I>(n_rows: usize, n_cols: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut entries: Vec<(usize, usize, f64)> = Vec::new();
        for (row, col, value) in triplets {
            if row >= n_rows || col >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row,
                    col,
                    n_rows,
                    n_cols,
                });
            }
            entries.push((row, col, value));
        }
        // stable sort keeps the summation order of duplicates equal to input order
        entries.sort_by_key(|&(r, c, _)| (r, c));

        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        let mut iter = entries.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            rows[r].push((c, v));
        }
        Ok(Self::from_sorted_rows(n_cols, rows))
    }

    /// Rows must already be sorted by column without duplicates; zeros are dropped.
    fn from_sorted_rows(n_cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n_rows = rows.len();
        let mut indptr = Vec::with_capacity(n_rows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if !is_zero(v) {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        SparseMatrix {
            n_rows,
            n_cols,
            indptr,
            indices,
            values,
        }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n_cols = rows.first().map_or(0, Vec::len);
        let rows = rows
            .iter()
            .map(|r| {
                assert_eq!(r.len(), n_cols, "ragged dense matrix");
                r.iter().copied().enumerate().collect()
            })
            .collect();
        Self::from_sorted_rows(n_cols, rows)
    }

    /// Dense row-major buffer of length `n_rows * n_cols`.
    pub fn from_dense_flat(n_rows: usize, n_cols: usize, data: &[f64]) -> Self {
        assert_eq!(data.len(), n_rows * n_cols);
        let rows = data
            .chunks(n_cols.max(1))
            .take(n_rows)
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        let mut m = Self::from_sorted_rows(n_cols, rows);
        m.n_rows = n_rows;
        if m.indptr.len() < n_rows + 1 {
            m.indptr.resize(n_rows + 1, 0);
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, c, v) in self.iter() {
            out[r][c] = v;
        }
        out
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[r]..self.indptr[r + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Entries as `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(pos) => vals[pos],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.n_cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.n_cols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for r in 0..self.n_rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let dst = next[c];
                indices[dst] = r;
                values[dst] = v;
                next[c] += 1;
            }
        }
        SparseMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            indptr,
            indices,
            values,
        }
    }

    /// Sparse product `self * other`.
    ///
    /// Rows are computed in parallel; within a row the accumulation order is
    /// fixed (left operand entries in column order), so the result does not
    /// depend on the thread count.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        if self.n_cols != other.n_rows {
            return Err(Error::DimensionMismatch {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let n_cols = other.n_cols;
        let rows: Vec<Vec<(usize, f64)>> = (0..self.n_rows)
            .into_par_iter()
            .map_init(
                || (vec![0.0f64; n_cols], vec![false; n_cols], Vec::new()),
                |(acc, seen, touched), r| {
                    let (a_cols, a_vals) = self.row(r);
                    for (&k, &a) in a_cols.iter().zip(a_vals) {
                        let (b_cols, b_vals) = other.row(k);
                        for (&c, &b) in b_cols.iter().zip(b_vals) {
                            if !seen[c] {
                                seen[c] = true;
                                touched.push(c);
                            }
                            acc[c] += a * b;
                        }
                    }
                    touched.sort_unstable();
                    let row: Vec<(usize, f64)> = touched.iter().map(|&c| (c, acc[c])).collect();
                    for &c in touched.iter() {
                        acc[c] = 0.0;
                        seen[c] = false;
                    }
                    touched.clear();
                    row
                },
            )
            .collect();
        Ok(Self::from_sorted_rows(n_cols, rows))
    }

    /// Divides each nonzero row by its L1 or L2 norm; zero rows are left alone.
    pub fn row_normalize(&self, norm: Norm) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let vals = &mut out.values[span];
            let n = match norm {
                Norm::L1 => vals.iter().map(|v| v.abs()).sum::<f64>(),
                Norm::L2 => vals.iter().map(|v| v * v).sum::<f64>().sqrt(),
            };
            if n > 0.0 {
                vals.iter_mut().for_each(|v| *v /= n);
            }
        }
        out.compact()
    }

    /// Raises every stored value to `exponent`; exponent 0 maps stored values to 1.
    pub fn elementwise_pow(&self, exponent: f64) -> Result<SparseMatrix> {
        let integral = exponent.fract() == 0.0;
        if !integral {
            if let Some(&value) = self.values.iter().find(|v| **v < 0.0) {
                return Err(Error::NegativeBase { value, exponent });
            }
        }
        let mut out = self.clone();
        if exponent == 0.0 {
            out.values.iter_mut().for_each(|v| *v = 1.0);
        } else if exponent != 1.0 {
            out.values.iter_mut().for_each(|v| *v = v.powf(exponent));
        }
        Ok(out.compact())
    }

    /// Keeps the `k` largest values of each row; ties at the cutoff go to the
    /// smaller column index.
    pub fn top_k_per_row(&self, k: usize) -> SparseMatrix {
        let rows = (0..self.n_rows)
            .map(|r| {
                let (cols, vals) = self.row(r);
                let mut entries: Vec<(usize, f64)> = cols.iter().copied().zip(vals.iter().copied()).collect();
                if entries.len() > k {
                    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
                    entries.truncate(k);
                    entries.sort_unstable_by_key(|e| e.0);
                }
                entries
            })
            .collect();
        Self::from_sorted_rows(self.n_cols, rows)
    }

    pub fn scale(&self, factor: f64) -> SparseMatrix {
        self.map_values(|_, _, v| v * factor)
    }

    /// Applies `f(row, col, value)` to every stored value.
    pub fn map_values<F: Fn(usize, usize, f64) -> f64>(&self, f: F) -> SparseMatrix {
        let mut out = self.clone();
        for r in 0..self.n_rows {
            for idx in self.indptr[r]..self.indptr[r + 1] {
                out.values[idx] = f(r, self.indices[idx], self.values[idx]);
            }
        }
        out.compact()
    }

    /// Keeps only entries for which `keep(row, col, value)` holds.
    pub fn filter<F: Fn(usize, usize, f64) -> bool>(&self, keep: F) -> SparseMatrix {
        self.map_values(|r, c, v| if keep(r, c, v) { v } else { 0.0 })
    }

    pub fn add(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    /// Elementwise combination over the union of supports, implicit zeros included.
    pub fn zip_with<F: Fn(f64, f64) -> f64>(
        &self,
        other: &SparseMatrix,
        op: &'static str,
        f: F,
    ) -> Result<SparseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                left: self.shape(),
                right: other.shape(),
            });
        }
        let rows = (0..self.n_rows)
            .map(|r| {
                let (ac, av) = self.row(r);
                let (bc, bv) = other.row(r);
                let mut out = Vec::with_capacity(ac.len() + bc.len());
                let (mut i, mut j) = (0, 0);
                while i < ac.len() || j < bc.len() {
                    let ca = ac.get(i).copied().unwrap_or(usize::MAX);
                    let cb = bc.get(j).copied().unwrap_or(usize::MAX);
                    if ca == cb {
                        out.push((ca, f(av[i], bv[j])));
                        i += 1;
                        j += 1;
                    } else if ca < cb {
                        out.push((ca, f(av[i], 0.0)));
                        i += 1;
                    } else {
                        out.push((cb, f(0.0, bv[j])));
                        j += 1;
                    }
                }
                out
            })
            .collect();
        Ok(Self::from_sorted_rows(self.n_cols, rows))
    }

    /// `max(S, Sᵀ)` elementwise. Square matrices only.
    pub fn symmetrize_max(&self) -> Result<SparseMatrix> {
        self.zip_with(&self.transpose(), "symmetrize_max", f64::max)
    }

    /// `(S + Sᵀ) / 2`. Square matrices only.
    pub fn symmetrize_mean(&self) -> Result<SparseMatrix> {
        self.zip_with(&self.transpose(), "symmetrize_mean", |a, b| 0.5 * (a + b))
    }

    pub fn without_diagonal(&self) -> SparseMatrix {
        self.filter(|r, c, _| r != c)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).1.iter().sum()).collect()
    }

    /// Number of stored entries in each column.
    pub fn col_nnz(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_cols];
        for &c in &self.indices {
            counts[c] += 1;
        }
        counts
    }

    /// Zeroes every column whose flag is false; the shape is unchanged.
    pub fn mask_cols(&self, keep: &[bool]) -> SparseMatrix {
        assert_eq!(keep.len(), self.n_cols);
        self.filter(|_, c, _| keep[c])
    }

    /// Zeroes every row whose flag is false; the shape is unchanged.
    pub fn mask_rows(&self, keep: &[bool]) -> SparseMatrix {
        assert_eq!(keep.len(), self.n_rows);
        self.filter(|r, _, _| keep[r])
    }

    /// Extracts the listed rows and columns, renumbered in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.n_cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let out_rows = rows
            .iter()
            .map(|&r| {
                let (cs, vs) = self.row(r);
                let mut row: Vec<(usize, f64)> = cs
                    .iter()
                    .zip(vs)
                    .filter(|(c, _)| col_map[**c] != usize::MAX)
                    .map(|(c, v)| (col_map[*c], *v))
                    .collect();
                row.sort_unstable_by_key(|e| e.0);
                row
            })
            .collect();
        Self::from_sorted_rows(cols.len(), out_rows)
    }

    /// Drops values that became structural zeros.
    fn compact(self) -> SparseMatrix {
        if !self.values.iter().any(|v| is_zero(*v)) {
            return self;
        }
        let rows = (0..self.n_rows)
            .map(|r| {
                let (c, v) = self.row(r);
                c.iter().copied().zip(v.iter().copied()).collect()
            })
            .collect();
        Self::from_sorted_rows(self.n_cols, rows)
    }

    /// Writes the COO text form: a `n_rows\tn_cols\tnnz` header followed by one
    /// `row\tcol\tvalue` line per entry, values with 17 significant digits.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut buf = String::with_capacity(32 * (self.nnz() + 1));
        let _ = writeln!(buf, "{}\t{}\t{}", self.n_rows, self.n_cols, self.nnz());
        for (r, c, v) in self.iter() {
            let _ = writeln!(buf, "{r}\t{c}\t{v:.16e}");
        }
        out.write_all(buf.as_bytes())
    }

    pub fn read_coo<R: Read>(input: R, path: &Path) -> Result<SparseMatrix> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = BufReader::new(input).lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))??;
        let dims: Vec<usize> = header
            .split('\t')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| parse_err(1, format!("bad header: {e}")))?;
        if dims.len() != 3 {
            return Err(parse_err(1, "header must have three fields".into()));
        }
        let mut triplets = Vec::with_capacity(dims[2]);
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(parse_err(i + 2, "expected row, col, value".into()));
            }
            let r = fields[0]
                .parse::<usize>()
                .map_err(|e| parse_err(i + 2, e.to_string()))?;
            let c = fields[1]
                .parse::<usize>()
                .map_err(|e| parse_err(i + 2, e.to_string()))?;
            let v = fields[2].parse::<f64>().map_err(|e| parse_err(i + 2, e.to_string()))?;
            triplets.push((r, c, v));
        }
        if triplets.len() != dims[2] {
            return Err(parse_err(
                1,
                format!("header declares {} entries, found {}", dims[2], triplets.len()),
            ));
        }
        SparseMatrix::from_triplets(dims[0], dims[1], triplets)
    }

    pub fn save_coo(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_coo(&mut buf)?;
        crate::io::write_atomic(path, &buf)
    }

    pub fn load_coo(path: &Path) -> Result<SparseMatrix> {
        Self::read_coo(crate::io::read_bytes(path)?.as_slice(), path)
    }

    #[cfg(test)]
    pub(crate) fn is_canonical(&self) -> bool {
        (0..self.n_rows).all(|r| {
            let (cols, vals) = self.row(r);
            cols.windows(2).all(|w| w[0] < w[1])
                && cols.iter().all(|&c| c < self.n_cols)
                && vals.iter().all(|v| !is_zero(*v))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn dense_product(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = a.len();
        let k = b.len();
        let m = b.first().map_or(0, Vec::len);
        let mut out = vec![vec![0.0; m]; n];
        for i in 0..n {
            for j in 0..m {
                for l in 0..k {
                    out[i][j] += a[i][l] * b[l][j];
                }
            }
        }
        out
    }

    fn small_matrix(max_dim: usize) -> impl Strategy<Value = SparseMatrix> {
        (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
            proptest::collection::vec(-3i32..=3, r * c).prop_map(move |vals| {
                let data: Vec<f64> = vals.into_iter().map(f64::from).collect();
                SparseMatrix::from_dense_flat(r, c, &data)
            })
        })
    }

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(2, 2, [(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 0), 3.0);
    }

    #[test]
    fn empty_and_tiny_values() {
        let m = SparseMatrix::from_triplets(2, 2, []).unwrap();
        assert_eq!(m, SparseMatrix::zeros(2, 2));
        let m = SparseMatrix::from_triplets(2, 2, [(0, 1, 1e-15)]).unwrap();
        assert_eq!(m.nnz(), 0);
    }

    #[test]
    fn out_of_range_index() {
        let err = SparseMatrix::from_triplets(2, 2, [(2, 0, 1.0)]).unwrap_err();
        assert!(matches!(err, Error::IndexOutOfRange { row: 2, .. }));
    }

    #[test]
    fn transpose_examples() {
        let m = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![0.0, 0.0]]);
        assert_eq!(m.transpose().to_dense(), vec![vec![0.0, 0.0], vec![1.0, 0.0]]);
        assert_eq!(SparseMatrix::identity(3).transpose(), SparseMatrix::identity(3));
    }

    #[test]
    fn matmul_example() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![0.0, 1.0]]);
        let b = SparseMatrix::from_dense(&[vec![0.0, -1.0], vec![-1.0, 0.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.to_dense(), vec![vec![-1.0, -1.0], vec![-1.0, 0.0]]);
        assert_eq!(a.matmul(&SparseMatrix::identity(2)).unwrap(), a);
    }

    #[test]
    fn matmul_dimension_mismatch() {
        let a = SparseMatrix::zeros(2, 3);
        let b = SparseMatrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matmul_drops_cancellations() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0]]);
        let b = SparseMatrix::from_dense(&[vec![1.0], vec![-1.0]]);
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.nnz(), 0);
    }

    #[test]
    fn row_normalize_examples() {
        let m = SparseMatrix::from_dense(&[vec![2.0, 2.0]]);
        assert_eq!(m.row_normalize(Norm::L1).to_dense(), vec![vec![0.5, 0.5]]);
        let z = SparseMatrix::from_dense(&[vec![0.0, 0.0]]);
        assert_eq!(z.row_normalize(Norm::L1), z);
        let m = SparseMatrix::from_dense(&[vec![3.0, 4.0]]);
        let n = m.row_normalize(Norm::L2);
        assert!((n.get(0, 0) - 0.6).abs() < 1e-15);
        assert!((n.get(0, 1) - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pow_examples() {
        let m = SparseMatrix::from_dense(&[vec![4.0, 9.0]]);
        assert_eq!(m.elementwise_pow(0.5).unwrap().to_dense(), vec![vec![2.0, 3.0]]);
        assert_eq!(m.elementwise_pow(1.0).unwrap(), m);
        let two = SparseMatrix::from_dense(&[vec![2.0]]);
        assert_eq!(two.elementwise_pow(0.0).unwrap().to_dense(), vec![vec![1.0]]);
        let neg = SparseMatrix::from_dense(&[vec![-2.0]]);
        assert!(matches!(neg.elementwise_pow(0.5), Err(Error::NegativeBase { .. })));
        assert_eq!(neg.elementwise_pow(2.0).unwrap().get(0, 0), 4.0);
    }

    #[test]
    fn top_k_examples() {
        let m = SparseMatrix::from_dense(&[vec![3.0, 1.0, 2.0]]);
        assert_eq!(m.top_k_per_row(2).to_dense(), vec![vec![3.0, 0.0, 2.0]]);
        let m = SparseMatrix::from_dense(&[vec![1.0, 1.0, 1.0]]);
        assert_eq!(m.top_k_per_row(1).to_dense(), vec![vec![1.0, 0.0, 0.0]]);
    }

    #[test]
    fn top_k_random_against_sort_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let dense: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                (0..20)
                    .map(|_| {
                        if rng.random_bool(0.5) {
                            rng.random_range(-5..=5) as f64
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let m = SparseMatrix::from_dense(&dense);
        let pruned = m.top_k_per_row(5);
        for (r, row) in dense.iter().enumerate() {
            assert!(pruned.row_nnz(r) <= 5);
            let kept: Vec<f64> = pruned.row(r).1.to_vec();
            let dropped: Vec<f64> = (0..20)
                .filter(|&c| row[c] != 0.0 && pruned.get(r, c) == 0.0)
                .map(|c| row[c])
                .collect();
            for k in &kept {
                for d in &dropped {
                    assert!(k >= d);
                }
            }
            let mut sorted: Vec<f64> = dense[r].iter().copied().filter(|v| *v != 0.0).collect();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let mut kept_sorted = kept.clone();
            kept_sorted.sort_by(|a, b| b.total_cmp(a));
            assert_eq!(kept_sorted, sorted.into_iter().take(5).collect::<Vec<_>>());
        }
    }

    #[test]
    fn coo_round_trip() {
        let m = SparseMatrix::from_triplets(3, 4, [(0, 1, 0.1), (2, 3, -1.0 / 3.0), (1, 0, 7.0)]).unwrap();
        let mut buf = Vec::new();
        m.write_coo(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("3\t4\t3\n0\t1\t"));
        let back = SparseMatrix::read_coo(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, m);
    }

    proptest! {
        #[test]
        fn transpose_is_involution(m in small_matrix(12)) {
            prop_assert_eq!(m.transpose().transpose(), m);
        }

        #[test]
        fn matmul_matches_dense_oracle(
            (a, b) in (1usize..=30, 1usize..=30, 1usize..=30).prop_flat_map(|(n, k, m)| {
                (
                    proptest::collection::vec(-3i32..=3, n * k),
                    proptest::collection::vec(-3i32..=3, k * m),
                ).prop_map(move |(x, y)| {
                    let x: Vec<f64> = x.into_iter().map(f64::from).collect();
                    let y: Vec<f64> = y.into_iter().map(f64::from).collect();
                    (SparseMatrix::from_dense_flat(n, k, &x), SparseMatrix::from_dense_flat(k, m, &y))
                })
            })
        ) {
            let c = a.matmul(&b).unwrap();
            prop_assert!(c.is_canonical());
            prop_assert_eq!(c.to_dense(), dense_product(&a.to_dense(), &b.to_dense()));
        }

        #[test]
        fn l1_rows_sum_to_one(m in small_matrix(10)) {
            let n = m.elementwise_pow(2.0).unwrap().row_normalize(Norm::L1);
            prop_assert!(n.is_canonical());
            for (r, s) in n.row_sums().into_iter().enumerate() {
                if n.row_nnz(r) > 0 {
                    prop_assert!((s - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn top_k_never_grows_and_is_idempotent(m in small_matrix(12), k in 1usize..6) {
            let p = m.top_k_per_row(k);
            prop_assert!(p.is_canonical());
            for r in 0..m.n_rows() {
                prop_assert!(p.row_nnz(r) <= m.row_nnz(r));
                prop_assert!(p.row_nnz(r) <= k);
            }
            prop_assert_eq!(p.top_k_per_row(k), p);
        }

        #[test]
        fn operations_store_no_zeros(m in small_matrix(10)) {
            prop_assert!(m.is_canonical());
            prop_assert!(m.transpose().is_canonical());
            prop_assert!(m.scale(1e-13).is_canonical());
            prop_assert!(m.add(&m.scale(-1.0)).unwrap().nnz() == 0);
        }
    }
}
