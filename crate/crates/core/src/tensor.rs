//! Row-major dense matrices, CSR matrices, and the `Features` wrapper that
//! lets node features stay sparse (bag-of-words inputs are ~1% dense).

use rand::Rng;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            values: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMatrix::zeros(n, n);
        for i in 0..n {
            m.values[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::input(format!(
                "matrix of {rows}x{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite matrix entry at flat index {bad}"
            )));
        }
        Ok(DenseMatrix { rows, cols, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::input("ragged rows"));
        }
        DenseMatrix::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.cols..(r + 1) * self.cols]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `self · other`.
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::input(format!(
                "matmul shape mismatch: {:?} x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let a_row = self.row(i);
            let o_row = &mut out.values[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in o_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other`, without materializing the transpose.
    pub fn t_matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != other.rows {
            return Err(Error::input(format!(
                "t_matmul shape mismatch: {:?}ᵀ x {:?}",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let b_row = other.row(i);
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o_row = &mut out.values[k * other.cols..(k + 1) * other.cols];
                for (o, &b) in o_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.cols {
            return Err(Error::input(format!(
                "matmul_t shape mismatch: {:?} x {:?}ᵀ",
                self.shape(),
                other.shape()
            )));
        }
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a_row = self.row(i);
            for j in 0..other.rows {
                out.values[i * other.rows + j] =
                    a_row.iter().zip(other.row(j)).map(|(a, b)| a * b).sum();
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.values[j * self.rows + i] = self.values[i * self.cols + j];
            }
        }
        out
    }

    pub fn gather_rows(&self, ids: &[usize]) -> DenseMatrix {
        let mut values = Vec::with_capacity(ids.len() * self.cols);
        for &i in ids {
            values.extend_from_slice(self.row(i));
        }
        DenseMatrix {
            rows: ids.len(),
            cols: self.cols,
            values,
        }
    }

    pub fn add_row_vector(&mut self, v: &[f64]) {
        debug_assert_eq!(v.len(), self.cols);
        for r in 0..self.rows {
            for (x, b) in self.row_mut(r).iter_mut().zip(v) {
                *x += b;
            }
        }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (s, x) in sums.iter_mut().zip(self.row(r)) {
                *s += x;
            }
        }
        sums
    }

    /// Row-wise softmax with max subtraction.
    pub fn softmax_rows(&self) -> DenseMatrix {
        let mut out = self.clone();
        for r in 0..out.rows {
            let row = out.row_mut(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        out
    }

    /// Per-row argmax; ties resolve to the lowest column index.
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate().skip(1) {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Compressed sparse rows with explicit values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn new(
        rows: usize,
        cols: usize,
        indptr: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if indptr.len() != rows + 1 || indptr[0] != 0 {
            return Err(Error::input("csr indptr must have rows+1 entries starting at 0"));
        }
        if indptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::input("csr indptr must be non-decreasing"));
        }
        let nnz = indptr[rows];
        if indices.len() != nnz || values.len() != nnz {
            return Err(Error::input(format!(
                "csr expects {nnz} stored entries, got {} indices / {} values",
                indices.len(),
                values.len()
            )));
        }
        if let Some(&c) = indices.iter().find(|&&c| c >= cols) {
            return Err(Error::input(format!("csr column {c} out of range ({cols})")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("non-finite csr value"));
        }
        Ok(CsrMatrix {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        let mut indptr = Vec::with_capacity(m.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for r in 0..m.rows() {
            for (c, &v) in m.row(r).iter().enumerate() {
                if v != 0.0 {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: m.rows(),
            cols: m.cols(),
            indptr,
            indices,
            values,
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out.set(r, c, out.get(r, c) + v);
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn indptr(&self) -> &[usize] {
        &self.indptr
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `self · dense`, accumulating each output row in CSR order.
    pub fn matmul_dense(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != dense.rows() {
            return Err(Error::input(format!(
                "sparse matmul shape mismatch: {}x{} x {:?}",
                self.rows,
                self.cols,
                dense.shape()
            )));
        }
        let m = dense.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        for r in 0..self.rows {
            let o_row = out.row_mut(r);
            for (c, v) in self.row(r) {
                for (o, &b) in o_row.iter_mut().zip(dense.row(c)) {
                    *o += v * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense`.
    pub fn t_matmul_dense(&self, dense: &DenseMatrix) -> Result<DenseMatrix> {
        if self.rows != dense.rows() {
            return Err(Error::input(format!(
                "sparse t_matmul shape mismatch: ({}x{})ᵀ x {:?}",
                self.rows,
                self.cols,
                dense.shape()
            )));
        }
        let m = dense.cols();
        let mut out = DenseMatrix::zeros(self.cols, m);
        for r in 0..self.rows {
            let b_row = dense.row(r);
            for (c, v) in self.row(r) {
                for (o, &b) in out.row_mut(c).iter_mut().zip(b_row) {
                    *o += v * b;
                }
            }
        }
        Ok(out)
    }

    pub fn gather_rows(&self, ids: &[usize]) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(ids.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for &r in ids {
            let span = self.indptr[r]..self.indptr[r + 1];
            indices.extend_from_slice(&self.indices[span.clone()]);
            values.extend_from_slice(&self.values[span]);
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: ids.len(),
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    fn with_values(&self, values: Vec<f64>) -> CsrMatrix {
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr: self.indptr.clone(),
            indices: self.indices.clone(),
            values,
        }
    }
}

/// Node feature matrix, dense or sparse. Only the operations the models need
/// are exposed: the first-layer product, its adjoint, row gathers, and
/// dropout on stored entries.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Dense(DenseMatrix),
    Sparse(CsrMatrix),
}

impl Features {
    /// Picks the sparse representation when at most a quarter of the entries
    /// are non-zero.
    pub fn auto(dense: DenseMatrix) -> Features {
        let nnz = dense.values().iter().filter(|v| **v != 0.0).count();
        if nnz * 4 <= dense.values().len() {
            Features::Sparse(CsrMatrix::from_dense(&dense))
        } else {
            Features::Dense(dense)
        }
    }

    pub fn rows(&self) -> usize {
        match self {
            Features::Dense(m) => m.rows(),
            Features::Sparse(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Features::Dense(m) => m.cols(),
            Features::Sparse(m) => m.cols(),
        }
    }

    /// Number of stored entries; this is the length of a dropout mask.
    pub fn stored_len(&self) -> usize {
        match self {
            Features::Dense(m) => m.values().len(),
            Features::Sparse(m) => m.nnz(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Features::Dense(m) => m.clone(),
            Features::Sparse(m) => m.to_dense(),
        }
    }

    pub fn matmul(&self, w: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Features::Dense(m) => m.matmul(w),
            Features::Sparse(m) => m.matmul_dense(w),
        }
    }

    pub fn t_matmul(&self, g: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            Features::Dense(m) => m.t_matmul(g),
            Features::Sparse(m) => m.t_matmul_dense(g),
        }
    }

    pub fn gather_rows(&self, ids: &[usize]) -> Features {
        match self {
            Features::Dense(m) => Features::Dense(m.gather_rows(ids)),
            Features::Sparse(m) => Features::Sparse(m.gather_rows(ids)),
        }
    }

    /// Scales every stored entry by the matching mask factor.
    pub fn apply_mask(&self, mask: &[f64]) -> Result<Features> {
        if mask.len() != self.stored_len() {
            return Err(Error::Internal(format!(
                "dropout mask has {} entries, features store {}",
                mask.len(),
                self.stored_len()
            )));
        }
        Ok(match self {
            Features::Dense(m) => {
                let values = m.values().iter().zip(mask).map(|(v, k)| v * k).collect();
                Features::Dense(DenseMatrix {
                    rows: m.rows(),
                    cols: m.cols(),
                    values,
                })
            }
            Features::Sparse(m) => {
                let values = m.values().iter().zip(mask).map(|(v, k)| v * k).collect();
                Features::Sparse(m.with_values(values))
            }
        })
    }

    /// L1-normalizes every row; all-zero rows stay zero.
    pub fn row_normalized(&self) -> Features {
        match self {
            Features::Dense(m) => {
                let mut out = m.clone();
                for r in 0..out.rows() {
                    let row = out.row_mut(r);
                    let s: f64 = row.iter().sum();
                    if s != 0.0 {
                        row.iter_mut().for_each(|x| *x /= s);
                    }
                }
                Features::Dense(out)
            }
            Features::Sparse(m) => {
                let mut values = m.values().to_vec();
                for r in 0..m.rows() {
                    let span = m.indptr()[r]..m.indptr()[r + 1];
                    let s: f64 = values[span.clone()].iter().sum();
                    if s != 0.0 {
                        values[span].iter_mut().for_each(|x| *x /= s);
                    }
                }
                Features::Sparse(m.with_values(values))
            }
        }
    }
}

/// Inverted dropout mask: kept entries are scaled by `1/(1-rate)`.
pub fn dropout_mask(len: usize, rate: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    if rate <= 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 - rate;
    let scale = 1.0 / keep;
    (0..len)
        .map(|_| if rng.gen::<f64>() < keep { scale } else { 0.0 })
        .collect()
}
