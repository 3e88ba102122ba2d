use super::DenseMatrix;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues of a symmetric matrix in ascending order (cyclic Jacobi).
///
/// Only intended for the small dense problems of the two-level analysis and
/// for spectral norms of sparsification blocks; cost is O(n³) per sweep.
pub fn sym_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    let n = m.rows();
    let mut a = m.clone();
    a.symmetrize();
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        let mut diag = 0.0;
        for j in 0..n {
            for i in 0..j {
                off += a[(i, j)] * a[(i, j)];
            }
            diag += a[(j, j)] * a[(j, j)];
        }
        if off <= f64::EPSILON * f64::EPSILON * 1e-4 * (diag + off) || off == 0.0 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s);
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

// A ← Jᵀ A J with the rotation acting on rows/cols p and q.
fn rotate(a: &mut DenseMatrix, p: usize, q: usize, c: f64, s: f64) {
    let n = a.rows();
    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
}

/// Largest singular value `‖M‖₂`, via the Gram matrix of the smaller side.
pub fn spectral_norm(m: &DenseMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let scale = m.max_abs();
    if scale == 0.0 {
        return 0.0;
    }
    let mut scaled = m.clone();
    scaled.scale(1.0 / scale);
    let gram = if scaled.rows() >= scaled.cols() {
        scaled.gram()
    } else {
        scaled.transpose().gram()
    };
    let top = sym_eigenvalues(&gram).last().copied().unwrap_or(0.0);
    scale * top.max(0.0).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_two_by_two() {
        let d = DenseMatrix::from_diagonal(&[3.0, -1.0, 2.0]);
        assert_eq!(sym_eigenvalues(&d), vec![-1.0, 2.0, 3.0]);
        let m = DenseMatrix::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]);
        let ev = sym_eigenvalues(&m);
        assert!((ev[0] - 1.0).abs() < 1e-15 && (ev[1] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn laplacian_path_spectrum() {
        // tridiag(-1, 2, -1) has eigenvalues 2 - 2 cos(kπ/(n+1))
        let n = 12;
        let m = DenseMatrix::from_fn(n, n, |i, j| {
            if i == j {
                2.0
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        let ev = sym_eigenvalues(&m);
        for (k, v) in ev.iter().enumerate() {
            let exact = 2.0 - 2.0 * ((k + 1) as f64 * std::f64::consts::PI / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13, "{v} vs {exact}");
        }
    }

    #[test]
    fn spectral_norm_of_rank_one() {
        let u = [1.0, 2.0, 2.0];
        let v = [3.0, 4.0];
        let m = DenseMatrix::from_fn(3, 2, |i, j| u[i] * v[j]);
        assert!((spectral_norm(&m) - 15.0).abs() < 1e-13);
        assert!((spectral_norm(&m.transpose()) - 15.0).abs() < 1e-13);
        assert_eq!(spectral_norm(&DenseMatrix::zeros(2, 0)), 0.0);
    }
}
