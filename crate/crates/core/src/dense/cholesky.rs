use super::DenseMatrix;
use crate::error::DenseError;

/// Lower Cholesky factor `L` with `L Lᵀ = M`.
///
/// Only the lower triangle of `M` is read. Fails with `NotSpd` at the first
/// pivot that is not strictly positive (or not finite).
pub fn cholesky(m: &DenseMatrix) -> Result<DenseMatrix, DenseError> {
    if !m.is_square() {
        return Err(DenseError::DimensionMismatch {
            expected: (m.rows(), m.rows()),
            found: m.shape(),
        });
    }
    let n = m.rows();
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            l[(j, i)] = m[(j, i)];
        }
    }
    // right-looking, column oriented
    for k in 0..n {
        let pivot = l[(k, k)];
        if !(pivot > 0.0) || !pivot.is_finite() {
            return Err(DenseError::NotSpd { pivot: k });
        }
        let d = pivot.sqrt();
        l[(k, k)] = d;
        let inv = 1.0 / d;
        {
            let col = &mut l.col_mut(k)[k + 1..];
            col.iter_mut().for_each(|v| *v *= inv);
        }
        for j in k + 1..n {
            let ljk = l[(j, k)];
            if ljk == 0.0 {
                continue;
            }
            // column j, rows j.. -= l[j.., k] * l[j, k]
            let data = l.as_mut_slice();
            let (head, tail) = data.split_at_mut(j * n);
            let ck = &head[k * n + j..k * n + n];
            let cj = &mut tail[j..n];
            for (t, &s) in cj.iter_mut().zip(ck) {
                *t -= s * ljk;
            }
        }
    }
    Ok(l)
}
