//! Early-stopping column-pivoted Householder QR.
//!
//! `A Π = Q R` is computed one column at a time with classical max-norm
//! pivoting. The factorization stops at the first pivot whose magnitude falls
//! strictly below `eps·|R(0,0)|` (or `eps²·|R(0,0)|` for the superfine split),
//! leaving the trailing block `Q_fᵀ A Π` unreduced. That trailing block is
//! exactly the dropped coupling `E`, so no extra work is needed to get it.

use super::{dot, norm2, DenseMatrix};
use crate::error::DenseError;
use crate::schemes::SchemeKind;

/// Downdated column norms are recomputed once they drop below this fraction
/// of the last exactly computed value.
const NORM_RECOMPUTE_RATIO: f64 = 0.1;

/// Thresholds, relative to `|R(0,0)|`, at which the factorization stops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRule {
    /// Pivots at or above `coarse·|R(0,0)|` are coarse.
    pub coarse: f64,
    /// When set, keep factoring past the coarse cut until a pivot drops below
    /// `fine2·|R(0,0)|`; the extra columns form the `f₂` block.
    pub fine2: Option<f64>,
}

impl StopRule {
    pub fn for_scheme(eps: f64, scheme: SchemeKind) -> Self {
        match scheme {
            SchemeKind::FirstOrder | SchemeKind::SecondOrderFull => {
                StopRule { coarse: eps, fine2: None }
            }
            SchemeKind::SecondOrderSuperfine => StopRule { coarse: eps, fine2: Some(eps * eps) },
        }
    }
}

/// Householder reflectors `H_j = I − τ_j v_j v_jᵀ`, with `v_j[j] = 1` implied
/// and `v_j[..j] = 0`. `Q = H_0 H_1 ⋯ H_{k−1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflectors {
    pub(crate) v: DenseMatrix,
    pub(crate) tau: Vec<f64>,
}

impl Reflectors {
    pub fn identity(m: usize) -> Self {
        Reflectors { v: DenseMatrix::zeros(m, 0), tau: Vec::new() }
    }

    /// Dimension of the space the reflectors act on.
    pub fn dim(&self) -> usize {
        self.v.rows()
    }

    pub fn count(&self) -> usize {
        self.tau.len()
    }

    pub fn vectors(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn taus(&self) -> &[f64] {
        &self.tau
    }

    pub(crate) fn from_parts(v: DenseMatrix, tau: Vec<f64>) -> Self {
        debug_assert_eq!(v.cols(), tau.len());
        Reflectors { v, tau }
    }

    /// `x ← Qᵀ x`
    pub fn apply_qt(&self, x: &mut [f64]) {
        for j in 0..self.count() {
            self.apply_one(j, x);
        }
    }

    /// `x ← Q x`
    pub fn apply_q(&self, x: &mut [f64]) {
        for j in (0..self.count()).rev() {
            self.apply_one(j, x);
        }
    }

    #[inline]
    fn apply_one(&self, j: usize, x: &mut [f64]) {
        let tau = self.tau[j];
        if tau == 0.0 {
            return;
        }
        let v = &self.v.col(j)[j + 1..];
        let s = tau * (x[j] + dot(v, &x[j + 1..]));
        x[j] -= s;
        for (xi, &vi) in x[j + 1..].iter_mut().zip(v) {
            *xi -= s * vi;
        }
    }

    /// Explicit `Q` (square).
    pub fn to_dense(&self) -> DenseMatrix {
        let m = self.dim();
        let mut q = DenseMatrix::identity(m);
        for c in 0..m {
            self.apply_q(q.col_mut(c));
        }
        q
    }

    /// Stored entries: each reflector holds `m − j` values plus its τ.
    pub fn stored_len(&self) -> usize {
        let m = self.dim();
        (0..self.count()).map(|j| m - j).sum()
    }
}

/// Compact output of the truncated pivoted QR.
#[derive(Debug, Clone)]
pub struct PivotedQr {
    reflectors: Reflectors,
    /// `Qᵀ A Π`: rows `< steps` hold `R`, rows `≥ steps` the unreduced trailing block.
    reduced: DenseMatrix,
    perm: Vec<usize>,
    pivots: Vec<f64>,
    rank_c: usize,
    steps: usize,
}

impl PivotedQr {
    pub fn compute(a: &DenseMatrix, rule: StopRule) -> Result<Self, DenseError> {
        for t in std::iter::once(rule.coarse).chain(rule.fine2) {
            if !(0.0..=1.0).contains(&t) {
                return Err(DenseError::InvalidTolerance(t));
            }
        }
        if !a.all_finite() {
            return Err(DenseError::NonFinite);
        }
        let (m, n) = a.shape();
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut vn1: Vec<f64> = (0..n).map(|j| norm2(w.col(j))).collect();
        let mut vn2 = vn1.clone();
        let mut v = DenseMatrix::zeros(m, m.min(n));
        let mut tau = Vec::with_capacity(m.min(n));
        let mut pivots = Vec::new();
        let mut rank_c: Option<usize> = None;
        let mut r00 = 0.0;

        for i in 0..m.min(n) {
            let p = i + argmax(&vn1[i..]);
            if p != i {
                swap_cols(&mut w, i, p);
                perm.swap(i, p);
                vn1.swap(i, p);
                vn2.swap(i, p);
            }
            let pivot_norm = norm2(&w.col(i)[i..]);
            if i == 0 {
                r00 = pivot_norm;
                if r00 == 0.0 {
                    rank_c = Some(0);
                    break;
                }
            }
            if rank_c.is_none() && pivot_norm < rule.coarse * r00 {
                rank_c = Some(i);
                if rule.fine2.is_none() {
                    break;
                }
            }
            if rank_c.is_some() {
                if let Some(f2) = rule.fine2 {
                    if pivot_norm < f2 * r00 {
                        break;
                    }
                }
            }

            let t = householder_in_place(&mut w.col_mut(i)[i..]);
            {
                let (wcol, vcol) = (&mut w.col_mut(i)[i + 1..], &mut v.col_mut(i)[i + 1..]);
                vcol.copy_from_slice(wcol);
                wcol.iter_mut().for_each(|x| *x = 0.0);
            }
            v[(i, i)] = 1.0;
            tau.push(t);
            pivots.push(w[(i, i)].abs());

            if t != 0.0 {
                let vi = &v.col(i)[i + 1..];
                for j in i + 1..n {
                    let cj = w.col_mut(j);
                    let s = t * (cj[i] + dot(vi, &cj[i + 1..]));
                    cj[i] -= s;
                    for (c, &vv) in cj[i + 1..].iter_mut().zip(vi) {
                        *c -= s * vv;
                    }
                }
            }

            for j in i + 1..n {
                if vn1[j] == 0.0 {
                    continue;
                }
                let r = w[(i, j)].abs() / vn1[j];
                let shrink = (1.0 - r * r).max(0.0);
                let downdated = vn1[j] * shrink.sqrt();
                if downdated < NORM_RECOMPUTE_RATIO * vn2[j] {
                    vn1[j] = norm2(&w.col(j)[i + 1..]);
                    vn2[j] = vn1[j];
                } else {
                    vn1[j] = downdated;
                }
            }
        }

        let steps = tau.len();
        let rank_c = rank_c.unwrap_or(steps);
        let v = v.submatrix(0, 0, m, steps);
        Ok(PivotedQr {
            reflectors: Reflectors::from_parts(v, tau),
            reduced: w,
            perm,
            pivots,
            rank_c,
            steps,
        })
    }

    pub fn rows(&self) -> usize {
        self.reduced.rows()
    }

    pub fn cols(&self) -> usize {
        self.reduced.cols()
    }

    /// Number of coarse columns `k`.
    pub fn rank_c(&self) -> usize {
        self.rank_c
    }

    /// Householder steps performed (`k` for the plain schemes, `k + |f₂|` for superfine).
    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn rank_f2(&self) -> usize {
        self.steps - self.rank_c
    }

    pub fn reflectors(&self) -> &Reflectors {
        &self.reflectors
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    /// `|R(j,j)|` for every performed step.
    pub fn pivots(&self) -> &[f64] {
        &self.pivots
    }

    /// Rows `r0..r1` of `Qᵀ A`, in the original column order.
    pub fn rows_unpermuted(&self, r0: usize, r1: usize) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(r1 - r0, self.cols());
        for (j, &pj) in self.perm.iter().enumerate() {
            out.col_mut(pj).copy_from_slice(&self.reduced.col(j)[r0..r1]);
        }
        out
    }

    /// Rows `r0..r1` of `Qᵀ A Π` restricted to the permuted columns `c0..`.
    /// Columns before `c0` are structurally zero for `r0 ≥ c0`.
    pub fn trailing_block(&self, r0: usize, r1: usize, c0: usize) -> DenseMatrix {
        self.reduced.submatrix(r0, c0, r1 - r0, self.cols() - c0)
    }

    /// `Q_cᵀ A = (R_cc R_cf) Πᵀ`
    pub fn coarse_rows(&self) -> DenseMatrix {
        self.rows_unpermuted(0, self.rank_c)
    }

    pub fn materialize(&self, scheme: SchemeKind) -> RrqrResult {
        let m = self.rows();
        let q = self.reflectors.to_dense();
        let k = self.rank_c;
        let e_tilde = match scheme {
            SchemeKind::FirstOrder => DenseMatrix::zeros(0, self.cols()),
            SchemeKind::SecondOrderFull => self.rows_unpermuted(k, m),
            SchemeKind::SecondOrderSuperfine => self.rows_unpermuted(k, self.steps),
        };
        RrqrResult {
            perm: self.perm.clone(),
            q_c: q.submatrix(0, 0, m, k),
            q_f: q.submatrix(0, k, m, m - k),
            r_coarse: self.coarse_rows(),
            e_tilde,
            rank_c: k,
            rank_f2: match scheme {
                SchemeKind::SecondOrderSuperfine => self.rank_f2(),
                _ => 0,
            },
        }
    }
}

/// Materialized sparsification of one interface panel.
#[derive(Debug, Clone)]
pub struct RrqrResult {
    /// Column permutation: column `j` of `A Π` is column `perm[j]` of `A`.
    pub perm: Vec<usize>,
    pub q_c: DenseMatrix,
    /// Fine basis; for superfine the first `rank_f2` columns are `Q_f₂`, the rest `Q_f₁`.
    pub q_f: DenseMatrix,
    /// `Q_cᵀ A`
    pub r_coarse: DenseMatrix,
    /// Empty (first order), `Q_fᵀ A` (full second order) or `Q_f₂ᵀ A` (superfine).
    pub e_tilde: DenseMatrix,
    pub rank_c: usize,
    pub rank_f2: usize,
}

/// Truncated pivoted QR of an interface panel, materialized for `scheme`.
pub fn rrqr_sparsify(
    a_pw: &DenseMatrix,
    eps: f64,
    scheme: SchemeKind,
) -> Result<RrqrResult, DenseError> {
    let qr = PivotedQr::compute(a_pw, StopRule::for_scheme(eps, scheme))?;
    Ok(qr.materialize(scheme))
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn swap_cols(w: &mut DenseMatrix, a: usize, b: usize) {
    let m = w.rows();
    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
    let (head, tail) = w.as_mut_slice().split_at_mut(hi * m);
    head[lo * m..(lo + 1) * m].swap_with_slice(&mut tail[..m]);
}

/// Turns `x` into `(β, v₁..)` and returns τ such that `(I − τ v vᵀ) x = β e₀`
/// with `v₀ = 1`.
fn householder_in_place(x: &mut [f64]) -> f64 {
    let alpha = x[0];
    let xnorm = norm2(&x[1..]);
    if xnorm == 0.0 {
        return 0.0;
    }
    let beta = -alpha.signum() * alpha.hypot(xnorm);
    let beta = if alpha == 0.0 { -alpha.hypot(xnorm) } else { beta };
    let tau = (beta - alpha) / beta;
    let scale = 1.0 / (alpha - beta);
    x[1..].iter_mut().for_each(|v| *v *= scale);
    x[0] = beta;
    tau
}
