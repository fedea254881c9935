//! Minimal dense and sparse matrix containers.
//!
//! `Dense` is a row-major `f64` matrix sized for embedding tables.
//! `Csr<T>` is compressed sparse row storage with generic entry values
//! (playtimes are integers, preferences are floats). `Pattern` is a CSR
//! structure without values, used for binary membership matrices.
//! Stored column indices are strictly increasing within each row, which
//! fixes the reduction order of every sparse operation.

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Dense {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "dense shape mismatch");
        Dense { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * other`, parallel over output rows.
    pub fn matmul(&self, other: &Dense) -> Dense {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let (n, k, m) = (self.rows, self.cols, other.cols);
        let mut out = Dense::zeros(n, m);
        let lhs = &self.data;
        let rhs = &other.data;
        par::for_each_row_mut(&mut out.data, m.max(1), |r, row| {
            if m == 0 {
                return;
            }
            for kk in 0..k {
                let a = lhs[r * k + kk];
                if a == 0.0 {
                    continue;
                }
                let rrow = &rhs[kk * m..(kk + 1) * m];
                for (o, &b) in row.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        });
        out
    }

    pub fn transpose(&self) -> Dense {
        let mut out = Dense::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Horizontal concatenation `[self | other]`.
    pub fn concat_cols(&self, other: &Dense) -> Dense {
        assert_eq!(self.rows, other.rows, "concat row mismatch");
        let cols = self.cols + other.cols;
        let mut out = Dense::zeros(self.rows, cols);
        for r in 0..self.rows {
            out.data[r * cols..r * cols + self.cols].copy_from_slice(self.row(r));
            out.data[r * cols + self.cols..(r + 1) * cols].copy_from_slice(other.row(r));
        }
        out
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sparse matrix in CSR form with values of type `T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<T>,
}

impl<T: Copy> Csr<T> {
    pub fn empty(rows: usize, cols: usize) -> Self {
        Csr {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Build from (row, col, value) triplets. Duplicate coordinates are
    /// rejected; callers merge duplicates first.
    pub fn from_triplets(rows: usize, cols: usize, triplets: &[(usize, usize, T)]) -> Result<Self> {
        let mut entries: Vec<(usize, usize, T)> = triplets.to_vec();
        for &(r, c, _) in &entries {
            if r >= rows || c >= cols {
                return Err(Error::data(format!(
                    "triplet ({r},{c}) outside {rows}x{cols} matrix"
                )));
            }
        }
        entries.sort_by_key(|&(r, c, _)| (r, c));
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::data(format!(
                    "duplicate entry at ({},{})",
                    w[0].0, w[0].1
                )));
            }
        }
        let mut indptr = vec![0usize; rows + 1];
        for &(r, _, _) in &entries {
            indptr[r + 1] += 1;
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        let indices = entries.iter().map(|&(_, c, _)| c).collect();
        let values = entries.iter().map(|&(_, _, v)| v).collect();
        Ok(Csr {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[T]) {
        let (lo, hi) = (self.indptr[r], self.indptr[r + 1]);
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn get(&self, r: usize, c: usize) -> Option<T> {
        let (cols, vals) = self.row(r);
        cols.binary_search(&c).ok().map(|k| vals[k])
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.rows).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn to_triplets(&self) -> Vec<(usize, usize, T)> {
        self.iter().collect()
    }

    pub fn transpose(&self) -> Csr<T> {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut cursor = counts;
        let mut indices = vec![0usize; self.nnz()];
        let mut values = self.values.clone();
        for r in 0..self.rows {
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let dst = cursor[c];
                indices[dst] = r;
                values[dst] = v;
                cursor[c] += 1;
            }
        }
        Csr {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
            values,
        }
    }

    /// Same structure, transformed values.
    pub fn map_values<U: Copy, F: Fn(T) -> U>(&self, f: F) -> Csr<U> {
        Csr {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Same structure, values recomputed per row in parallel. `f` receives
    /// the row index, its column indices, and its values, and must return
    /// one value per entry.
    pub fn map_rows<U, F>(&self, f: F) -> Csr<U>
    where
        T: Sync,
        U: Copy + Send,
        F: Fn(usize, &[usize], &[T]) -> Vec<U> + Sync + Send,
    {
        let per_row: Vec<Vec<U>> = par::map_range(self.rows, |r| {
            let (cols, vals) = self.row(r);
            let out = f(r, cols, vals);
            debug_assert_eq!(out.len(), cols.len());
            out
        });
        Csr {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values: per_row.into_iter().flatten().collect(),
        }
    }
}

impl Csr<f64> {
    /// Sparse × dense product, parallel over output rows.
    pub fn matmul_dense(&self, rhs: &Dense) -> Dense {
        assert_eq!(self.cols, rhs.rows(), "spmm shape mismatch");
        let m = rhs.cols();
        let mut out = Dense::zeros(self.rows, m);
        par::for_each_row_mut(out.data_mut(), m.max(1), |r, row| {
            if m == 0 {
                return;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                let rrow = rhs.row(c);
                for (o, &b) in row.iter_mut().zip(rrow) {
                    *o += v * b;
                }
            }
        });
        out
    }
}

/// Binary sparse structure (CSR without values).
#[derive(Debug, Clone, PartialEq)]
pub struct Pattern {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Pattern {
    /// Build from per-row column lists. Columns within a row are sorted
    /// and must be unique.
    pub fn from_rows(cols: usize, rows: &[Vec<usize>]) -> Result<Self> {
        let mut indptr = vec![0usize; rows.len() + 1];
        let mut indices = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            let mut sorted = row.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != row.len() {
                return Err(Error::data(format!("duplicate column in pattern row {r}")));
            }
            if let Some(&c) = sorted.last() {
                if c >= cols {
                    return Err(Error::data(format!(
                        "column {c} outside pattern width {cols}"
                    )));
                }
            }
            indices.extend_from_slice(&sorted);
            indptr[r + 1] = indices.len();
        }
        Ok(Pattern {
            rows: rows.len(),
            cols,
            indptr,
            indices,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn row(&self, r: usize) -> &[usize] {
        &self.indices[self.indptr[r]..self.indptr[r + 1]]
    }

    pub fn row_nnz(&self, r: usize) -> usize {
        self.indptr[r + 1] - self.indptr[r]
    }

    pub fn contains(&self, r: usize, c: usize) -> bool {
        self.row(r).binary_search(&c).is_ok()
    }

    pub fn transpose(&self) -> Pattern {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for i in 0..self.cols {
            counts[i + 1] += counts[i];
        }
        let indptr = counts.clone();
        let mut cursor = counts;
        let mut indices = vec![0usize; self.nnz()];
        for r in 0..self.rows {
            for &c in self.row(r) {
                indices[cursor[c]] = r;
                cursor[c] += 1;
            }
        }
        Pattern {
            rows: self.cols,
            cols: self.rows,
            indptr,
            indices,
        }
    }

    /// Row sums of `pattern × dense` (for each row, the sum of the dense
    /// rows its columns point at).
    pub fn sum_rows(&self, rhs: &Dense) -> Dense {
        assert_eq!(self.cols, rhs.rows(), "pattern product shape mismatch");
        let m = rhs.cols();
        let mut out = Dense::zeros(self.rows, m);
        par::for_each_row_mut(out.data_mut(), m.max(1), |r, row| {
            if m == 0 {
                return;
            }
            for &c in self.row(r) {
                for (o, &b) in row.iter_mut().zip(rhs.row(c)) {
                    *o += b;
                }
            }
        });
        out
    }
}
