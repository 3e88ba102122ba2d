//! Sparse symmetric storage, problem generators and vector utilities.

mod generators;
mod mtx;

pub use generators::{
    high_contrast_field, laplacian_2d, laplacian_from_field, p_sequence, poisson_eigvec,
    poisson_eigenvalue, write_eigen_csv, CoefficientField,
};
pub use mtx::{read_matrix_market, read_matrix_market_from, write_matrix_market, write_matrix_market_to};

use crate::error::SparseError;

/// Symmetric matrix in CSR form with both triangles stored explicitly.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from `(row, col, value)` triplets covering *both* triangles.
    ///
    /// Rejects duplicates, out-of-range indices, mismatched symmetric pairs and
    /// missing or non-positive diagonal entries.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self, SparseError> {
        let mut counts = vec![0usize; n + 1];
        for &(i, j, v) in triplets {
            if i >= n || j >= n {
                return Err(SparseError::InvalidStructure(format!(
                    "entry ({i}, {j}) outside a {n}×{n} matrix"
                )));
            }
            if !v.is_finite() {
                return Err(SparseError::InvalidStructure(format!("non-finite entry at ({i}, {j})")));
            }
            counts[i + 1] += 1;
        }
        for i in 0..n {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0; triplets.len()];
        let mut values = vec![0.0; triplets.len()];
        for &(i, j, v) in triplets {
            col_idx[next[i]] = j;
            values[next[i]] = v;
            next[i] += 1;
        }
        for i in 0..n {
            let r = row_ptr[i]..row_ptr[i + 1];
            let mut row: Vec<(usize, f64)> =
                col_idx[r.clone()].iter().copied().zip(values[r.clone()].iter().copied()).collect();
            row.sort_by_key(|e| e.0);
            if let Some(w) = row.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(SparseError::InvalidStructure(format!(
                    "duplicate entry ({i}, {})",
                    w[0].0
                )));
            }
            for (k, (c, v)) in r.zip(row) {
                col_idx[k] = c;
                values[k] = v;
            }
        }
        let m = SparseSymMatrix { n, row_ptr, col_idx, values };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), SparseError> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                match self.get(j, i) {
                    Some(w) if w == v => {}
                    Some(_) => return Err(SparseError::AsymmetricValues { row: i, col: j }),
                    None => {
                        return Err(SparseError::InvalidStructure(format!(
                            "entry ({i}, {j}) has no symmetric counterpart"
                        )))
                    }
                }
            }
            match self.get(i, i) {
                Some(d) if d > 0.0 => {}
                _ => return Err(SparseError::NonpositiveDiagonal { index: i }),
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Stored entries (both triangles).
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).ok().map(|k| vals[k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i).unwrap_or(0.0)).collect()
    }

    /// `y = A x`
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let (cols, vals) = self.row(i);
            *yi = cols.iter().zip(vals).map(|(&j, &v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.spmv(x, &mut y);
        y
    }

    pub fn to_dense(&self) -> crate::dense::DenseMatrix {
        let mut d = crate::dense::DenseMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Dense-to-sparse, keeping entries with `|a_ij| > 0`.
    pub fn from_dense(m: &crate::dense::DenseMatrix) -> Result<Self, SparseError> {
        let n = m.rows();
        let mut t = Vec::new();
        for j in 0..m.cols() {
            for i in 0..n {
                if m[(i, j)] != 0.0 {
                    t.push((i, j, m[(i, j)]));
                }
            }
        }
        Self::from_triplets(n, &t)
    }

    pub fn identity(n: usize) -> Self {
        SparseSymMatrix {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Off-diagonal adjacency of row `i`.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.row(i).0.iter().copied().filter(move |&j| j != i)
    }

    /// Largest `|A_ij − A_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                let w = self.get(j, i).unwrap_or(f64::INFINITY);
                worst = worst.max((v - w).abs());
            }
        }
        worst
    }
}

/// Symmetric diagonal scaling `A′ = D^{-1/2} A D^{-1/2}`, `b′ = D^{-1/2} b`.
///
/// Returns `D` (the original diagonal); recover `x = D^{-1/2} x′`. The unit
/// diagonal of `A′` is set exactly, so already-scaled input is returned unchanged.
pub fn jacobi_prescale(
    a: &SparseSymMatrix,
    b: &[f64],
) -> Result<(SparseSymMatrix, Vec<f64>, Vec<f64>), SparseError> {
    let d = a.diagonal();
    if let Some(index) = d.iter().position(|&x| !(x > 0.0)) {
        return Err(SparseError::NonpositiveDiagonal { index });
    }
    let s: Vec<f64> = d.iter().map(|x| x.sqrt()).collect();
    let mut scaled = a.clone();
    for i in 0..a.n {
        let r = a.row_ptr[i]..a.row_ptr[i + 1];
        for k in r {
            let j = a.col_idx[k];
            scaled.values[k] = if i == j { 1.0 } else { a.values[k] / (s[i] * s[j]) };
        }
    }
    let b2 = b.iter().zip(&s).map(|(x, si)| x / si).collect();
    Ok((scaled, b2, d))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    crate::dense::dot(a, b)
}

pub fn norm2(a: &[f64]) -> f64 {
    crate::dense::norm2(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplet_validation() {
        let ok = SparseSymMatrix::from_triplets(2, &[(0, 0, 2.0), (1, 1, 2.0), (0, 1, -1.0), (1, 0, -1.0)]);
        assert_eq!(ok.unwrap().nnz(), 4);
        let asym = SparseSymMatrix::from_triplets(2, &[(0, 0, 2.0), (1, 1, 2.0), (0, 1, -1.0), (1, 0, -2.0)]);
        assert!(matches!(asym, Err(SparseError::AsymmetricValues { .. })));
        let dup = SparseSymMatrix::from_triplets(1, &[(0, 0, 2.0), (0, 0, 2.0)]);
        assert!(matches!(dup, Err(SparseError::InvalidStructure(_))));
        let neg = SparseSymMatrix::from_triplets(1, &[(0, 0, -2.0)]);
        assert!(matches!(neg, Err(SparseError::NonpositiveDiagonal { index: 0 })));
    }

    #[test]
    fn prescale_scalar_case() {
        let a = SparseSymMatrix::from_triplets(3, &[(0, 0, 4.0), (1, 1, 4.0), (2, 2, 4.0)]).unwrap();
        let (s, b, d) = jacobi_prescale(&a, &[2.0, 4.0, -6.0]).unwrap();
        assert_eq!(s, SparseSymMatrix::identity(3));
        assert_eq!(b, vec![1.0, 2.0, -3.0]);
        assert_eq!(d, vec![4.0; 3]);
    }

    #[test]
    fn prescale_is_idempotent_on_unit_diagonal() {
        let a = laplacian_2d(5);
        let (s, _, _) = jacobi_prescale(&a, &[1.0; 25]).unwrap();
        assert!(s.diagonal().iter().all(|&x| x == 1.0));
        let (s2, _, _) = jacobi_prescale(&s, &[1.0; 25]).unwrap();
        assert_eq!(s, s2);
    }
}
