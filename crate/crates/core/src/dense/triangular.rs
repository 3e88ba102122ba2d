use super::{dot, DenseMatrix};
use crate::error::DenseError;

/// Which side the triangular factor sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Solve `op(L) X = B`.
    Left,
    /// Solve `X op(L) = B`.
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transpose {
    No,
    Yes,
}

/// Solve with a lower-triangular `L`: `op(L) X = B` (left) or `X op(L) = B`
/// (right), where `op` is the identity or the transpose.
pub fn tri_solve(
    l: &DenseMatrix,
    b: &DenseMatrix,
    side: Side,
    trans: Transpose,
) -> Result<DenseMatrix, DenseError> {
    let n = l.rows();
    if !l.is_square() {
        return Err(DenseError::DimensionMismatch { expected: (n, n), found: l.shape() });
    }
    if let Some(index) = (0..n).find(|&i| l[(i, i)] == 0.0) {
        return Err(DenseError::SingularTriangular { index });
    }
    match side {
        Side::Left => {
            if b.rows() != n {
                return Err(DenseError::DimensionMismatch {
                    expected: (n, b.cols()),
                    found: b.shape(),
                });
            }
            let mut x = b.clone();
            for j in 0..x.cols() {
                match trans {
                    Transpose::No => lower_solve_in_place(l, x.col_mut(j)),
                    Transpose::Yes => lower_t_solve_in_place(l, x.col_mut(j)),
                }
            }
            Ok(x)
        }
        Side::Right => {
            if b.cols() != n {
                return Err(DenseError::DimensionMismatch {
                    expected: (b.rows(), n),
                    found: b.shape(),
                });
            }
            // X op(L) = B  <=>  op(L)ᵀ Xᵀ = Bᵀ
            let flipped = match trans {
                Transpose::No => Transpose::Yes,
                Transpose::Yes => Transpose::No,
            };
            Ok(tri_solve(l, &b.transpose(), Side::Left, flipped)?.transpose())
        }
    }
}

/// In-place `x ← L⁻¹ x`. The caller guarantees a nonzero diagonal.
#[inline]
pub(crate) fn lower_solve_in_place(l: &DenseMatrix, x: &mut [f64]) {
    let n = l.rows();
    debug_assert_eq!(x.len(), n);
    for k in 0..n {
        if x[k] == 0.0 {
            continue;
        }
        let col = l.col(k);
        let xk = x[k] / col[k];
        x[k] = xk;
        for (xi, &lik) in x[k + 1..].iter_mut().zip(&col[k + 1..]) {
            *xi -= lik * xk;
        }
    }
}

/// In-place `x ← L⁻ᵀ x`.
#[inline]
pub(crate) fn lower_t_solve_in_place(l: &DenseMatrix, x: &mut [f64]) {
    let n = l.rows();
    debug_assert_eq!(x.len(), n);
    for k in (0..n).rev() {
        let col = l.col(k);
        let s = dot(&col[k + 1..], &x[k + 1..]);
        x[k] = (x[k] - s) / col[k];
    }
}

/// In-place `x ← L x` for lower-triangular `L`.
#[cfg(test)]
fn lower_mul_in_place(l: &DenseMatrix, x: &mut [f64]) {
    let n = l.rows();
    for k in (0..n).rev() {
        let col = l.col(k);
        let xk = x[k];
        for (xi, &lik) in x[k + 1..].iter_mut().zip(&col[k + 1..]) {
            *xi += lik * xk;
        }
        x[k] = col[k] * xk;
    }
}

/// In-place `x ← Lᵀ x` for lower-triangular `L`.
#[cfg(test)]
fn lower_t_mul_in_place(l: &DenseMatrix, x: &mut [f64]) {
    let n = l.rows();
    for k in 0..n {
        let col = l.col(k);
        x[k] = col[k] * x[k] + dot(&col[k + 1..], &x[k + 1..]);
    }
}
