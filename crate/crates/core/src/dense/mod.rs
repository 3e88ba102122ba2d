//! Dense column-major matrices and the kernels the factorization is built
//! from: Cholesky, triangular solves, the truncated pivoted QR used for
//! sparsification, and a symmetric eigenvalue routine for spectral norms.

mod cholesky;
mod eigen;
mod rrqr;
pub(crate) mod triangular;

pub use cholesky::cholesky;
pub use eigen::{spectral_norm, sym_eigenvalues};
pub use rrqr::{rrqr_sparsify, PivotedQr, Reflectors, RrqrResult, StopRule};
pub use triangular::{tri_solve, Side, Transpose};

use std::fmt;
use std::ops::{Index, IndexMut};

use crate::error::DenseError;

/// Column-major dense matrix.
#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(12) {
            write!(f, "  ")?;
            for j in 0..self.cols.min(12) {
                write!(f, "{:>12.4e}", self[(i, j)])?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// Build from column-major storage.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, DenseError> {
        if data.len() != rows * cols {
            return Err(DenseError::DimensionMismatch {
                expected: (rows, cols),
                found: (data.len(), 1),
            });
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Build from a slice of rows. Panics on ragged input.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self::from_fn(r, c, |i, j| rows[i][j])
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            let c = self.col(j);
            for (i, &v) in c.iter().enumerate() {
                t.data[i * self.cols + j] = v;
            }
        }
        t
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: f64, other: &DenseMatrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Copy of the block `rows × cols` starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, rows: usize, cols: usize) -> DenseMatrix {
        assert!(r0 + rows <= self.rows && c0 + cols <= self.cols);
        let mut out = DenseMatrix::zeros(rows, cols);
        for j in 0..cols {
            out.col_mut(j).copy_from_slice(&self.col(c0 + j)[r0..r0 + rows]);
        }
        out
    }

    /// Rows selected by index, all columns.
    pub fn select_rows(&self, idx: &[usize]) -> DenseMatrix {
        DenseMatrix::from_fn(idx.len(), self.cols, |i, j| self[(idx[i], j)])
    }

    /// Columns selected by index, all rows.
    pub fn select_cols(&self, idx: &[usize]) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, idx.len());
        for (k, &j) in idx.iter().enumerate() {
            out.col_mut(k).copy_from_slice(self.col(j));
        }
        out
    }

    pub fn set_submatrix(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for j in 0..block.cols {
            let rows = self.rows;
            let dst = &mut self.data[(c0 + j) * rows + r0..(c0 + j) * rows + r0 + block.rows];
            dst.copy_from_slice(block.col(j));
        }
    }

    /// Horizontal concatenation. All blocks must share the row count `rows`.
    pub fn hcat(rows: usize, blocks: &[&DenseMatrix]) -> DenseMatrix {
        let cols = blocks.iter().map(|b| b.cols).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for b in blocks {
            assert_eq!(b.rows, rows, "hcat row mismatch");
            data.extend_from_slice(&b.data);
        }
        DenseMatrix { rows, cols, data }
    }

    /// Vertical concatenation. All blocks must share the column count `cols`.
    pub fn vcat(cols: usize, blocks: &[&DenseMatrix]) -> DenseMatrix {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let mut out = DenseMatrix::zeros(rows, cols);
        let mut r0 = 0;
        for b in blocks {
            assert_eq!(b.cols, cols, "vcat column mismatch");
            out.set_submatrix(r0, 0, b);
            r0 += b.rows;
        }
        out
    }

    /// `y = self * x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        self.gemv_acc(1.0, x, &mut y);
        y
    }

    /// `y += alpha * self * x`
    pub fn gemv_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let a = alpha * xj;
            for (yi, &cij) in y.iter_mut().zip(self.col(j)) {
                *yi += a * cij;
            }
        }
    }

    /// `y += alpha * selfᵀ * x`
    pub fn gemv_t_acc(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.rows);
        debug_assert_eq!(y.len(), self.cols);
        for (j, yj) in y.iter_mut().enumerate() {
            *yj += alpha * dot(self.col(j), x);
        }
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension");
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            let bj = other.col(j);
            let rows = self.rows;
            let oj = &mut out.data[j * rows..(j + 1) * rows];
            for (k, &bkj) in bj.iter().enumerate() {
                if bkj == 0.0 {
                    continue;
                }
                for (o, &a) in oj.iter_mut().zip(self.col(k)) {
                    *o += a * bkj;
                }
            }
        }
        out
    }

    /// `selfᵀ * other`
    pub fn t_matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.rows, other.rows, "t_matmul inner dimension");
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for j in 0..other.cols {
            let bj = other.col(j);
            for i in 0..self.cols {
                out.data[j * self.cols + i] = dot(self.col(i), bj);
            }
        }
        out
    }

    /// `self * otherᵀ`
    pub fn matmul_t(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.cols, "matmul_t inner dimension");
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for k in 0..self.cols {
            let ak = self.col(k);
            let bk = other.col(k);
            for (j, &bjk) in bk.iter().enumerate() {
                if bjk == 0.0 {
                    continue;
                }
                let rows = self.rows;
                let oj = &mut out.data[j * rows..(j + 1) * rows];
                for (o, &a) in oj.iter_mut().zip(ak) {
                    *o += a * bjk;
                }
            }
        }
        out
    }

    /// Symmetric Gram product `selfᵀ * self`, computed on one triangle.
    pub fn gram(&self) -> DenseMatrix {
        let n = self.cols;
        let mut out = DenseMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..=j {
                let v = dot(self.col(i), self.col(j));
                out.data[j * n + i] = v;
                out.data[i * n + j] = v;
            }
        }
        out
    }

    /// Largest absolute asymmetry `max |a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        assert!(self.is_square());
        let mut worst: f64 = 0.0;
        for j in 0..self.cols {
            for i in 0..j {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Replace with `(A + Aᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        assert!(self.is_square());
        let n = self.rows;
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (self.data[j * n + i] + self.data[i * n + j]);
                self.data[j * n + i] = v;
                self.data[i * n + j] = v;
            }
        }
    }

    /// Number of entries in the lower triangle (including the diagonal).
    pub fn lower_triangle_len(&self) -> usize {
        let n = self.rows.min(self.cols);
        n * (n + 1) / 2 + (self.rows - n) * self.cols
    }

    /// Number of entries in the upper trapezoid (including the diagonal).
    pub fn upper_trapezoid_len(&self) -> usize {
        (0..self.cols).map(|j| (j + 1).min(self.rows)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.cols).all(|j| self.col(j).iter().enumerate().all(|(i, &x)| i == j || x == 0.0))
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let k = 4 * c;
        acc[0] += a[k] * b[k];
        acc[1] += a[k + 1] * b[k + 1];
        acc[2] += a[k + 2] * b[k + 2];
        acc[3] += a[k + 3] * b[k + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for k in 4 * chunks..a.len() {
        s += a[k] * b[k];
    }
    s
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    // scaled to avoid overflow on large entries
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let s: f64 = a.iter().map(|v| (v / scale) * (v / scale)).sum();
    scale * s.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        DenseMatrix::from_fn(rows, cols, |_, _| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        })
    }

    fn naive(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        DenseMatrix::from_fn(a.rows(), b.cols(), |i, j| {
            (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum()
        })
    }

    #[test]
    fn products_agree_with_naive() {
        let a = sample(5, 7, 1);
        let b = sample(7, 3, 2);
        let c = sample(5, 3, 3);
        let reference = naive(&a, &b);
        assert!(a.matmul(&b).sub(&reference).max_abs() < 1e-14);
        assert!(a.transpose().t_matmul(&b).sub(&reference).max_abs() < 1e-14);
        assert!(a.matmul_t(&b.transpose()).sub(&reference).max_abs() < 1e-14);
        assert!(c.gram().sub(&naive(&c.transpose(), &c)).max_abs() < 1e-14);
    }

    #[test]
    fn concatenation_and_blocks() {
        let a = sample(3, 2, 4);
        let b = sample(3, 4, 5);
        let h = DenseMatrix::hcat(3, &[&a, &b]);
        assert_eq!(h.shape(), (3, 6));
        assert_eq!(h.submatrix(0, 2, 3, 4), b);
        let v = DenseMatrix::vcat(2, &[&a, &a.transpose().transpose()]);
        assert_eq!(v.submatrix(3, 0, 3, 2), a);
        assert_eq!(h.select_cols(&[0, 1]), a);
    }

    #[test]
    fn matvec_transposes() {
        let a = sample(4, 6, 9);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.0).collect();
        let y = a.matvec(&x);
        let y2 = a.transpose().transpose().matvec(&x);
        assert_eq!(y, y2);
        let mut z = vec![0.0; 6];
        a.gemv_t_acc(1.0, &y, &mut z);
        let z_ref = a.transpose().matvec(&y);
        for (p, q) in z.iter().zip(&z_ref) {
            assert!((p - q).abs() < 1e-14);
        }
    }
}
