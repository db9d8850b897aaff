//! Dense row-major kernels: products, Householder least squares, softmax and
//! the pointwise nonlinearities used by the LSTM cell.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};

/// Contiguous vector of `f64`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl From<&[f64]> for DenseVector {
    fn from(v: &[f64]) -> Self {
        Self(v.to_vec())
    }
}

impl Deref for DenseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape {
                op: "DenseMatrix::new",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("DenseMatrix::new"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::config("ragged rows in DenseMatrix::from_rows"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    /// Builds a matrix whose `j`-th column is `columns[j]`.
    pub fn from_columns(rows: usize, columns: &[DenseVector]) -> Result<Self> {
        let cols = columns.len();
        let mut m = Self::zeros(rows, cols);
        for (j, c) in columns.iter().enumerate() {
            if c.len() != rows {
                return Err(Error::Shape {
                    op: "DenseMatrix::from_columns",
                    left: (rows, cols),
                    right: (c.len(), 1),
                });
            }
            for i in 0..rows {
                m.data[i * cols + j] = c[i];
            }
        }
        Ok(m)
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> DenseVector {
        (0..self.rows).map(|i| self.get(i, j)).collect::<Vec<_>>().into()
    }

    pub fn set_column(&mut self, j: usize, values: &[f64]) {
        debug_assert_eq!(values.len(), self.rows);
        for (i, &v) in values.iter().enumerate() {
            self.data[i * self.cols + j] = v;
        }
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Submatrix made of the listed columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, columns.len());
        for i in 0..self.rows {
            let row = self.row(i);
            for (k, &j) in columns.iter().enumerate() {
                out.data[i * columns.len() + k] = row[j];
            }
        }
        out
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::Shape {
                op: "matmul",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let (n, p) = (self.rows, other.cols);
        let mut out = DenseMatrix::zeros(n, p);
        for i in 0..n {
            let out_row = &mut out.data[i * p..(i + 1) * p];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                let b_row = &other.data[k * p..(k + 1) * p];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self · x`.
    pub fn matvec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(Error::Shape {
                op: "matvec",
                left: self.shape(),
                right: (x.len(), 1),
            });
        }
        let mut out = vec![0.0; self.rows];
        gemv_acc(&mut out, self, x);
        Ok(out.into())
    }

    /// `selfᵀ · x`.
    pub fn matvec_transposed(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.rows {
            return Err(Error::Shape {
                op: "matvec_transposed",
                left: (self.cols, self.rows),
                right: (x.len(), 1),
            });
        }
        let mut out = vec![0.0; self.cols];
        gemv_t_acc(&mut out, self, x);
        Ok(out.into())
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.shape() != other.shape() {
            return Err(Error::Shape {
                op: "sub",
                left: self.shape(),
                right: other.shape(),
            });
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix { data, ..*self })
    }

    pub fn scaled(&self, factor: f64) -> DenseMatrix {
        DenseMatrix {
            data: self.data.iter().map(|x| x * factor).collect(),
            ..*self
        }
    }
}

/// `out += m · x` on raw slices; shapes are the caller's responsibility.
#[inline]
pub(crate) fn gemv_acc(out: &mut [f64], m: &DenseMatrix, x: &[f64]) {
    let cols = m.cols;
    for (o, row) in out.iter_mut().zip(m.data.chunks_exact(cols)) {
        *o += dot(row, x);
    }
}

/// `out += mᵀ · x` on raw slices.
#[inline]
pub(crate) fn gemv_t_acc(out: &mut [f64], m: &DenseMatrix, x: &[f64]) {
    let cols = m.cols;
    for (row, &xi) in m.data.chunks_exact(cols).zip(x) {
        if xi != 0.0 {
            for (o, &a) in out.iter_mut().zip(row) {
                *o += a * xi;
            }
        }
    }
}

/// `m += a · bᵀ`.
#[inline]
pub(crate) fn outer_acc(m: &mut DenseMatrix, a: &[f64], b: &[f64]) {
    let cols = m.cols;
    for (row, &ai) in m.data.chunks_exact_mut(cols).zip(a) {
        if ai != 0.0 {
            for (r, &bj) in row.iter_mut().zip(b) {
                *r += ai * bj;
            }
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four independent accumulators let the compiler vectorize the loop; the
    // summation order is fixed, so results stay deterministic.
    let len = a.len().min(b.len());
    let (a, b) = (&a[..len], &b[..len]);
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[2]) + (acc[1] + acc[3]) + tail
}

/// Relative pivot tolerance for rank-deficiency detection in [`least_squares_solve`].
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Minimizes `‖y − A s‖₂` by Householder QR.
///
/// Requires `A.cols() ≤ A.rows()` and full column rank; a diagonal entry of `R`
/// with `|R_kk| < 1e-12·‖A‖_F` is reported as [`Error::Singular`] for column `k`.
pub fn least_squares_solve(a: &DenseMatrix, y: &[f64]) -> Result<DenseVector> {
    let (m, q) = a.shape();
    if y.len() != m {
        return Err(Error::Shape {
            op: "least_squares_solve",
            left: (m, q),
            right: (y.len(), 1),
        });
    }
    if q > m {
        return Err(Error::Shape {
            op: "least_squares_solve (underdetermined)",
            left: (m, q),
            right: (y.len(), 1),
        });
    }
    if q == 0 {
        return Ok(DenseVector::zeros(0));
    }
    let tol = RANK_TOLERANCE * a.frobenius_norm();
    let mut r = a.data.clone();
    let mut rhs = y.to_vec();
    let mut v = vec![0.0; m];

    for k in 0..q {
        let norm_x = (k..m).map(|i| r[i * q + k].powi(2)).sum::<f64>().sqrt();
        let x0 = r[k * q + k];
        let alpha = if x0 >= 0.0 { -norm_x } else { norm_x };
        if alpha.abs() < tol || norm_x == 0.0 {
            return Err(Error::Singular {
                column: k,
                pivot: alpha.abs(),
            });
        }
        for i in k..m {
            v[i] = r[i * q + k];
        }
        v[k] -= alpha;
        let vtv: f64 = (k..m).map(|i| v[i] * v[i]).sum();
        if vtv > 0.0 {
            for j in k..q {
                let s: f64 = (k..m).map(|i| v[i] * r[i * q + j]).sum();
                let f = 2.0 * s / vtv;
                for i in k..m {
                    r[i * q + j] -= f * v[i];
                }
            }
            let s: f64 = (k..m).map(|i| v[i] * rhs[i]).sum();
            let f = 2.0 * s / vtv;
            for i in k..m {
                rhs[i] -= f * v[i];
            }
        }
        r[k * q + k] = alpha;
    }

    let mut s = vec![0.0; q];
    for k in (0..q).rev() {
        let mut acc = rhs[k];
        for j in k + 1..q {
            acc -= r[k * q + j] * s[j];
        }
        s[k] = acc / r[k * q + k];
    }
    Ok(s.into())
}

/// Softmax with the max-shift for overflow safety.
pub fn softmax(z: &[f64]) -> DenseVector {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut p: Vec<f64> = z.iter().map(|&x| (x - max).exp()).collect();
    let total: f64 = p.iter().sum();
    for x in &mut p {
        *x /= total;
    }
    p.into()
}

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pointwise {
    Sigmoid,
    Tanh,
}

pub fn apply(kind: Pointwise, x: &[f64]) -> DenseVector {
    let f: fn(f64) -> f64 = match kind {
        Pointwise::Sigmoid => sigmoid,
        Pointwise::Tanh => f64::tanh,
    };
    x.iter().map(|&v| f(v)).collect::<Vec<_>>().into()
}

pub fn hadamard(a: &[f64], b: &[f64]) -> Result<DenseVector> {
    if a.len() != b.len() {
        return Err(Error::Shape {
            op: "hadamard",
            left: (a.len(), 1),
            right: (b.len(), 1),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>().into())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &v) in x.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
