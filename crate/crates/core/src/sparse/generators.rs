use std::f64::consts::PI;
use std::io::Write;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SparseSymMatrix;

/// 5-point Laplacian on a `d × d` grid with Dirichlet boundary; unknown
/// `(i, j)` has index `i·d + j`.
pub fn laplacian_2d(d: usize) -> SparseSymMatrix {
    laplacian_from_field(&CoefficientField::constant(d, 1.0))
}

/// Piecewise-constant diffusion coefficient on a `d × d` grid of cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientField {
    pub d: usize,
    /// Row-major, `a[i·d + j]`.
    pub a: Vec<f64>,
    pub rho: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl CoefficientField {
    pub fn constant(d: usize, value: f64) -> Self {
        CoefficientField { d, a: vec![value; d * d], rho: 1.0, sigma: 0.0, seed: 0 }
    }

    pub fn from_values(d: usize, a: Vec<f64>) -> Self {
        assert_eq!(a.len(), d * d, "field must have d² entries");
        CoefficientField { d, a, rho: 1.0, sigma: 0.0, seed: 0 }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.d + j]
    }
}

/// Uniform on the open interval (0, 1) from the top 53 bits.
#[inline]
fn uniform_open(rng: &mut ChaCha8Rng) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// High-contrast field: i.i.d. uniform noise, smoothed by a Gaussian of
/// standard deviation `sigma` (truncated at `⌈3σ⌉` and renormalized at the
/// grid edge), then quantized to `rho` (≥ 0.5) or `1/rho`.
pub fn high_contrast_field(d: usize, rho: f64, sigma: f64, seed: u64) -> CoefficientField {
    assert!(d >= 2 && rho >= 1.0 && sigma > 0.0, "invalid field parameters");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..d * d).map(|_| uniform_open(&mut rng)).collect();

    let radius = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> =
        (-radius..=radius).map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    // separable: rows then columns, each renormalized to the in-grid mass
    let smooth = |src: &[f64], along_rows: bool| -> Vec<f64> {
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let (mut acc, mut mass) = (0.0, 0.0);
                for (t, &w) in kernel.iter().enumerate() {
                    let off = t as isize - radius;
                    let (ii, jj) = if along_rows {
                        (i as isize, j as isize + off)
                    } else {
                        (i as isize + off, j as isize)
                    };
                    if ii < 0 || jj < 0 || ii >= d as isize || jj >= d as isize {
                        continue;
                    }
                    acc += w * src[ii as usize * d + jj as usize];
                    mass += w;
                }
                out[i * d + j] = acc / mass;
            }
        }
        out
    };
    let smoothed = smooth(&smooth(&raw, true), false);
    let a = smoothed.iter().map(|&x| if x >= 0.5 { rho } else { 1.0 / rho }).collect();
    CoefficientField { d, a, rho, sigma, seed }
}

/// Finite-volume discretization of `−∇·(a∇u)` with arithmetic-mean face
/// coefficients. A boundary face contributes the cell's own coefficient,
/// so the constant field reproduces the 5-point stencil exactly.
pub fn laplacian_from_field(field: &CoefficientField) -> SparseSymMatrix {
    let d = field.d;
    let n = d * d;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(5 * n);
    let mut values = Vec::with_capacity(5 * n);
    row_ptr.push(0);
    for i in 0..d {
        for j in 0..d {
            let a0 = field.at(i, j);
            let mut entries: Vec<(usize, f64)> = Vec::with_capacity(5);
            let mut diag = 0.0;
            let nbrs = [
                (i.wrapping_sub(1), j),
                (i, j.wrapping_sub(1)),
                (i, j + 1),
                (i + 1, j),
            ];
            for (ni, nj) in nbrs {
                if ni < d && nj < d {
                    let w = 0.5 * (a0 + field.at(ni, nj));
                    diag += w;
                    entries.push((ni * d + nj, -w));
                } else {
                    diag += a0;
                }
            }
            entries.push((i * d + j, diag));
            entries.sort_by_key(|e| e.0);
            for (c, v) in entries {
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
    }
    SparseSymMatrix { n, row_ptr, col_idx, values }
}

/// `λ_p = 8 sin²(pπ / (2(d+1)))`
pub fn poisson_eigenvalue(d: usize, p: usize) -> f64 {
    let s = (p as f64 * PI / (2.0 * (d + 1) as f64)).sin();
    8.0 * s * s
}

/// Unit-norm eigenvector `x(i,j) = sin(p(i+1)π/(d+1)) sin(p(j+1)π/(d+1))` of
/// [`laplacian_2d`] and its eigenvalue.
pub fn poisson_eigvec(d: usize, p: usize) -> (Vec<f64>, f64) {
    assert!((1..=d).contains(&p), "mode p = {p} outside 1..={d}");
    let h = PI / (d + 1) as f64;
    let s: Vec<f64> = (1..=d).map(|i| (p as f64 * i as f64 * h).sin()).collect();
    let mut v = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            v.push(s[i] * s[j]);
        }
    }
    let nrm = super::norm2(&v);
    v.iter_mut().for_each(|x| *x /= nrm);
    (v, poisson_eigenvalue(d, p))
}

/// Distinct values of `⌊1.25^k⌋`, `k = 0, 1, …`, up to `d`.
pub fn p_sequence(d: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    let mut x = 1.0f64;
    while x.floor() as usize <= d {
        let p = x.floor() as usize;
        if out.last() != Some(&p) {
            out.push(p);
        }
        x *= 1.25;
    }
    out
}

/// CSV of `(p, lambda, value)` rows.
pub fn write_eigen_csv<W: Write>(mut w: W, rows: &[(usize, f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "p,lambda,value")?;
    for (p, l, v) in rows {
        writeln!(w, "{p},{l:e},{v:e}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_grid() {
        let a = laplacian_2d(2);
        assert_eq!(a.n(), 4);
        for i in 0..4 {
            let (cols, vals) = a.row(i);
            assert_eq!(cols.len(), 3);
            for (&c, &v) in cols.iter().zip(vals) {
                assert_eq!(v, if c == i { 4.0 } else { -1.0 });
            }
        }
    }

    #[test]
    fn center_row_stencil() {
        let a = laplacian_2d(3);
        let (cols, vals) = a.row(4);
        assert_eq!(cols, &[1, 3, 4, 5, 7]);
        assert_eq!(vals, &[-1.0, -1.0, 4.0, -1.0, -1.0]);
    }

    #[test]
    fn arithmetic_mean_edges() {
        let f = CoefficientField::from_values(2, vec![1.0, 1.0, 1.0, 3.0]);
        let a = laplacian_from_field(&f);
        assert_eq!(a.get(2, 3), Some(-2.0));
        assert_eq!(a.get(3, 3), Some(2.0 + 2.0 + 3.0 + 3.0));
    }

    #[test]
    fn fields() {
        let f = high_contrast_field(16, 1.0, 2.0, 7);
        assert!(f.a.iter().all(|&x| x == 1.0));
        let f = high_contrast_field(32, 100.0, 2.0, 7);
        assert!(f.a.iter().all(|&x| x == 100.0 || x == 0.01));
        assert!(f.a.contains(&100.0) && f.a.contains(&0.01));
        assert_eq!(high_contrast_field(8, 100.0, 2.0, 3), high_contrast_field(8, 100.0, 2.0, 3));
    }

    #[test]
    fn eigenpairs() {
        let d = 20;
        let a = laplacian_2d(d);
        for p in [1, 5, 20] {
            let (v, l) = poisson_eigvec(d, p);
            assert!((super::super::norm2(&v) - 1.0).abs() < 1e-14);
            let av = a.mul_vec(&v);
            let r: Vec<f64> = av.iter().zip(&v).map(|(x, y)| x - l * y).collect();
            assert!(super::super::norm2(&r) <= 1e-12);
        }
    }

    #[test]
    fn p_sequence_shape() {
        let s = p_sequence(1000);
        assert_eq!(&s[..8], &[1, 2, 3, 4, 5, 7, 9, 11]);
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(*s.last().unwrap() <= 1000);
        let lo = poisson_eigenvalue(1000, s[0]);
        let hi = poisson_eigenvalue(1000, *s.last().unwrap());
        assert!((lo - 1.97e-5).abs() < 1e-7, "{lo}");
        assert!(hi > 7.0 && hi < 8.0, "{hi}");
    }
}
