#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use spand::DenseMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// `G Gᵀ + shift·I`
pub fn spd(n: usize, shift: f64, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let g = gaussian(n, n, rng);
    let mut a = g.matmul_t(&g);
    for i in 0..n {
        a[(i, i)] += shift;
    }
    a.symmetrize();
    a
}

pub fn to_na(m: &DenseMatrix) -> DMatrix<f64> {
    DMatrix::from_column_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_col_major(m.nrows(), m.ncols(), m.as_slice().to_vec()).unwrap()
}

pub fn svd_values(m: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(m).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
    s
}

pub fn na_norm2(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `U diag(σ) Vᵀ` with Haar-ish orthogonal factors.
pub fn with_singular_values(rows: usize, cols: usize, sigma: &[f64], rng: &mut ChaCha8Rng) -> DenseMatrix {
    let u = to_na(&gaussian(rows, rows, rng)).qr().q();
    let v = to_na(&gaussian(cols, cols, rng)).qr().q();
    let mut s = DMatrix::zeros(rows, cols);
    for (i, &x) in sigma.iter().enumerate() {
        s[(i, i)] = x;
    }
    from_na(&(u * s * v.transpose()))
}
