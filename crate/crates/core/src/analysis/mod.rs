//! Two-level analysis: one sparsification of a leading block followed by an
//! exact solve of the rest, in dense arithmetic.
//!
//! With `Z = diag(Z₁, I)` (`A₁₁ = Z₁Z₁ᵀ`) and `V = diag([Q_f Q_c], I)`,
//!
//! ```text
//! A = Z V [ I   Ê ] Vᵀ Zᵀ,    Â = [ I_c  Q_cᵀZ₁⁻¹A₁₂ ],   Ê = ( 0  Q_fᵀZ₁⁻¹A₁₂ ).
//!         [ Êᵀ  Â ]                [  ⋯       A₂₂    ]
//! ```
//!
//! The first-order factor drops `Ê` entirely, the second-order factor keeps
//! it in a unit block-triangular correction, and the superfine factor keeps
//! only the `f₂` rows `Ê₂`. Everything is controlled by `ẽ = ‖L̂⁻¹Êᵀ‖₂`.

mod theorem;
pub mod verify;

pub use theorem::{
    make_theorem_instance, second_order_system, theorem_harness, theorem_harness_with,
    TheoremInstance, TheoremOutcome,
};

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::dense::{cholesky, spectral_norm, sym_eigenvalues, tri_solve, DenseMatrix, Side, Transpose};
use crate::error::DenseError;
use crate::krylov::{cg_bound_rate, LinearOperator, Preconditioner};
use crate::schemes::{make_sparsification, SchemeKind};

#[derive(Debug, Clone)]
pub struct TwoLevelSetup {
    pub a: DenseMatrix,
    /// Size of the sparsified leading block.
    pub p: usize,
    pub eps: f64,
    pub scheme: SchemeKind,
    pub z1: DenseMatrix,
    /// `[Q_f Q_c]`, fine columns ordered `(f₂, f₁)`.
    pub v1: DenseMatrix,
    pub rank_c: usize,
    pub rank_f2: usize,
    pub a_hat: DenseMatrix,
    /// `|f| × (k + |w|)`, zero on the coarse columns.
    pub e_hat: DenseMatrix,
    pub l_hat: DenseMatrix,
    pub e_tilde: f64,
}

impl TwoLevelSetup {
    pub fn fine(&self) -> usize {
        self.p - self.rank_c
    }

    /// `Ê₂` (leading `rank_f2` rows of `Ê`).
    pub fn e_hat2(&self) -> DenseMatrix {
        self.e_hat.submatrix(0, 0, self.rank_f2, self.e_hat.cols())
    }

    /// `Ê₁` (trailing rows of `Ê`).
    pub fn e_hat1(&self) -> DenseMatrix {
        self.e_hat.submatrix(self.rank_f2, 0, self.fine() - self.rank_f2, self.e_hat.cols())
    }

    /// The part of `Ê` the scheme's factor keeps (rows not kept are zeroed).
    fn kept(&self, scheme: SchemeKind) -> DenseMatrix {
        match scheme {
            SchemeKind::FirstOrder => DenseMatrix::zeros(self.e_hat.rows(), self.e_hat.cols()),
            SchemeKind::SecondOrderFull => self.e_hat.clone(),
            SchemeKind::SecondOrderSuperfine => {
                let mut e = self.e_hat.clone();
                for j in 0..e.cols() {
                    e.col_mut(j)[self.rank_f2..].iter_mut().for_each(|x| *x = 0.0);
                }
                e
            }
        }
    }

    /// `Vᵀ Z⁻¹ X Z⁻ᵀ V` for a dense symmetric `X`.
    fn to_middle(&self, x: &DenseMatrix) -> Result<DenseMatrix, DenseError> {
        let t = self.z_inv_sandwich(x)?;
        let v = self.v();
        Ok(v.t_matmul(&t).matmul(&v))
    }

    fn z(&self) -> DenseMatrix {
        let n = self.a.rows();
        let mut z = DenseMatrix::identity(n);
        z.set_submatrix(0, 0, &self.z1);
        z
    }

    fn v(&self) -> DenseMatrix {
        let n = self.a.rows();
        let mut v = DenseMatrix::identity(n);
        v.set_submatrix(0, 0, &self.v1);
        v
    }

    fn z_inv_sandwich(&self, x: &DenseMatrix) -> Result<DenseMatrix, DenseError> {
        let z = self.z();
        let left = tri_solve(&z, x, Side::Left, Transpose::No)?;
        tri_solve(&z, &left, Side::Right, Transpose::Yes)
    }

    fn outer(&self, e: &DenseMatrix, schur: &DenseMatrix) -> DenseMatrix {
        let f = self.fine();
        let m = self.a_hat.rows();
        let mut mid = DenseMatrix::identity(f + m);
        mid.set_submatrix(0, f, e);
        mid.set_submatrix(f, 0, &e.transpose());
        mid.set_submatrix(f, f, schur);
        let zv = self.z().matmul(&self.v());
        zv.matmul(&mid).matmul_t(&zv)
    }

    /// `L Lᵀ` of the scheme's factor, realized densely.
    pub fn factor_product(&self, scheme: SchemeKind) -> DenseMatrix {
        let e = self.kept(scheme);
        self.outer(&e, &self.a_hat.add(&e.t_matmul(&e)))
    }

    /// `‖A − Z V [I Ê; Êᵀ Â] Vᵀ Zᵀ‖₂`: zero up to rounding.
    pub fn exact_reconstruction_error(&self) -> f64 {
        spectral_norm(&self.a.sub(&self.outer(&self.e_hat, &self.a_hat)))
    }

    /// `‖A − L Lᵀ‖₂` of the scheme's factor.
    pub fn reconstruction_error(&self, scheme: SchemeKind) -> f64 {
        spectral_norm(&self.a.sub(&self.factor_product(scheme)))
    }
}

/// One sparsification of the leading `p × p` block of `a`, followed by exact
/// Cholesky of the remaining system.
pub fn build_two_level(
    a: &DenseMatrix,
    p: usize,
    eps: f64,
    scheme: SchemeKind,
) -> Result<TwoLevelSetup, DenseError> {
    let n = a.rows();
    if !a.is_square() || p == 0 || p > n {
        return Err(DenseError::DimensionMismatch { expected: (n, n), found: (p, a.cols()) });
    }
    let w = n - p;
    let a11 = a.submatrix(0, 0, p, p);
    let a12 = a.submatrix(0, p, p, w);
    let a22 = a.submatrix(p, p, w, w);
    let z1 = cholesky(&a11)?;
    let panel = tri_solve(&z1, &a12, Side::Left, Transpose::No)?;
    let sp = make_sparsification(&panel, eps, scheme)?;
    let k = sp.rank_c();
    let rank_f2 = sp.rank_f2();
    let q = sp.reflectors().to_dense();
    // [Q_f Q_c]
    let v1 = DenseMatrix::hcat(p, &[&q.submatrix(0, k, p, p - k), &q.submatrix(0, 0, p, k)]);
    let proj = q.t_matmul(&panel);
    let c_rows = proj.submatrix(0, 0, k, w);
    let e_rows = proj.submatrix(k, 0, p - k, w);

    let mut a_hat = DenseMatrix::identity(k + w);
    a_hat.set_submatrix(0, k, &c_rows);
    a_hat.set_submatrix(k, 0, &c_rows.transpose());
    a_hat.set_submatrix(k, k, &a22);
    a_hat.symmetrize();
    let mut e_hat = DenseMatrix::zeros(p - k, k + w);
    e_hat.set_submatrix(0, k, &e_rows);
    let l_hat = cholesky(&a_hat)?;
    let e_tilde = spectral_norm(&tri_solve(&l_hat, &e_hat.transpose(), Side::Left, Transpose::No)?);
    Ok(TwoLevelSetup {
        a: a.clone(),
        p,
        eps,
        scheme,
        z1,
        v1,
        rank_c: k,
        rank_f2,
        a_hat,
        e_hat,
        l_hat,
        e_tilde,
    })
}

/// `κ₁ = (1 + ẽ)/(1 − ẽ)`
pub fn cond_first(setup: &TwoLevelSetup) -> f64 {
    kappa_first(setup.e_tilde)
}

/// `κ₂ = 1/(1 − ẽ²)`
pub fn cond_second(setup: &TwoLevelSetup) -> f64 {
    kappa_second(setup.e_tilde)
}

pub fn kappa_first(e: f64) -> f64 {
    (1.0 + e) / (1.0 - e)
}

pub fn kappa_second(e: f64) -> f64 {
    1.0 / (1.0 - e * e)
}

/// Dense `L⁻¹ A L⁻ᵀ` for the scheme's two-level factor, computed from `A`
/// itself (not from the closed forms).
pub fn precond_matrix(setup: &TwoLevelSetup, scheme: SchemeKind) -> Result<DenseMatrix, DenseError> {
    let u = setup.to_middle(&setup.a)?;
    let f = setup.fine();
    let m = setup.a_hat.rows();
    // L_mid⁻¹ = [[I, 0], [−L̂⁻¹Eᵀ, L̂⁻¹]]
    let e = setup.kept(scheme);
    let lhat_inv = tri_solve(&setup.l_hat, &DenseMatrix::identity(m), Side::Left, Transpose::No)?;
    let mut linv = DenseMatrix::identity(f + m);
    let mut corr = lhat_inv.matmul_t(&e);
    corr.scale(-1.0);
    linv.set_submatrix(f, 0, &corr);
    linv.set_submatrix(f, f, &lhat_inv);
    let mut k = linv.matmul(&u).matmul_t(&linv);
    k.symmetrize();
    Ok(k)
}

/// The structured residual `L₃⁻¹AL₃⁻ᵀ − I` predicted for the superfine factor:
/// the `Ê₁` cross term and `−L̂⁻¹Ê₂ᵀÊ₂L̂⁻ᵀ`.
pub fn superfine_residual_prediction(setup: &TwoLevelSetup) -> Result<DenseMatrix, DenseError> {
    let f = setup.fine();
    let m = setup.a_hat.rows();
    let mut e1 = setup.e_hat.clone();
    for j in 0..e1.cols() {
        e1.col_mut(j)[..setup.rank_f2].iter_mut().for_each(|x| *x = 0.0);
    }
    let cross = tri_solve(&setup.l_hat, &e1.transpose(), Side::Left, Transpose::No)?;
    let y = tri_solve(&setup.l_hat, &setup.e_hat2().transpose(), Side::Left, Transpose::No)?;
    let mut out = DenseMatrix::zeros(f + m, f + m);
    out.set_submatrix(0, f, &cross.transpose());
    out.set_submatrix(f, 0, &cross);
    let mut g = y.matmul_t(&y);
    g.scale(-1.0);
    out.set_submatrix(f, f, &g);
    Ok(out)
}

/// `λ_max / λ_min` of a dense SPD matrix.
pub fn dense_condition(m: &DenseMatrix) -> f64 {
    let ev = sym_eigenvalues(m);
    ev[ev.len() - 1] / ev[0]
}

/// `(R₁, R₂, |R₁² − R₂|)` from `ẽ`.
pub fn rate_identity(e_tilde: f64) -> (f64, f64, f64) {
    let r1 = cg_bound_rate(kappa_first(e_tilde));
    let r2 = cg_bound_rate(kappa_second(e_tilde));
    (r1, r2, (r1 * r1 - r2).abs())
}

/// CSV of `(e_tilde, kappa1, kappa2, r1, r2)`.
pub fn write_rate_csv<W: Write>(mut w: W, e_values: &[f64]) -> std::io::Result<()> {
    writeln!(w, "e_tilde,kappa1,kappa2,r1,r2")?;
    for &e in e_values {
        let (r1, r2, _) = rate_identity(e);
        writeln!(w, "{e},{:e},{:e},{:e},{:e}", kappa_first(e), kappa_second(e), r1, r2)?;
    }
    Ok(())
}

/// `‖(I − M A) v‖₂`
pub fn forward_error<A, M>(m: &M, a: &A, v: &[f64]) -> f64
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    let mut av = vec![0.0; v.len()];
    a.apply(v, &mut av);
    let mut mav = vec![0.0; v.len()];
    m.precondition(&av, &mut mav);
    let d: Vec<f64> = v.iter().zip(&mav).map(|(x, y)| x - y).collect();
    crate::dense::norm2(&d)
}

/// Random dense SPD test matrix `G Gᵀ + 0.1 I` whose `G` has geometrically
/// decaying column scales, so off-diagonal blocks are numerically low rank.
pub fn random_spd(n: usize, decay: f64, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DenseMatrix::from_fn(n, n, |_, j| {
        let z: f64 = StandardNormal.sample(&mut rng);
        z * decay.powi(j as i32)
    });
    let mut a = g.matmul_t(&g);
    for i in 0..n {
        a[(i, i)] += 0.1;
    }
    a.symmetrize();
    a
}

/// Gaussian matrix with the given seed.
pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

/// Fixed single-block problem with `A₁₁` SPD, `A₂₂ = I` and a scaled panel
/// `Z₁⁻¹A₁₂ = U diag(σ)` with orthogonal columns, so the pivoted QR pivots
/// are exactly `σ`. `σ₀ = 0.5` and `σⱼ = 0.5·10^(−(j − ½)/2)`: every power of
/// ten falls midway between two pivots, so the truncation at `eps = 10⁻ᵏ`
/// drops the same relative amount for every `k`.
pub fn decay_problem(p: usize, w: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let orth = |m: usize, rng: &mut ChaCha8Rng| {
        let g = gaussian_matrix(m, m, rng);
        crate::dense::PivotedQr::compute(&g, crate::dense::StopRule { coarse: 0.0, fine2: None })
            .expect("finite")
            .reflectors()
            .to_dense()
    };
    let u = orth(p, &mut rng);
    let mut s = DenseMatrix::zeros(p, w);
    for j in 0..p.min(w) {
        let decades = if j == 0 { 0.0 } else { (j as f64 - 0.5) / 2.0 };
        s[(j, j)] = 0.5 * 10f64.powf(-decades);
    }
    let panel = u.matmul(&s);
    let g = gaussian_matrix(p, p, &mut rng);
    let mut a11 = g.matmul_t(&g);
    for i in 0..p {
        a11[(i, i)] += p as f64;
    }
    a11.symmetrize();
    let z1 = cholesky(&a11).expect("SPD by construction");
    let a12 = z1.matmul(&panel);
    let mut a = DenseMatrix::identity(p + w);
    a.set_submatrix(0, 0, &a11);
    a.set_submatrix(0, p, &a12);
    a.set_submatrix(p, 0, &a12.transpose());
    a
}

/// Least-squares slope of `log₁₀ y` against `log₁₀ x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let lx: Vec<f64> = x.iter().map(|v| v.log10()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.log10()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_forms() {
        assert_eq!(kappa_first(0.0), 1.0);
        assert_eq!(kappa_first(0.5), 3.0);
        assert_eq!(kappa_second(0.0), 1.0);
        assert!((kappa_second(0.5) - 4.0 / 3.0).abs() < 1e-15);
        let (r1, r2, gap) = rate_identity(0.0);
        assert_eq!((r1, r2, gap), (0.0, 0.0, 0.0));
        assert!(rate_identity(0.5).2 < 1e-15);
    }

    #[test]
    fn decoupled_block() {
        let mut a = DenseMatrix::identity(8);
        a[(0, 0)] = 3.0;
        let s = build_two_level(&a, 3, 0.1, SchemeKind::SecondOrderFull).unwrap();
        assert_eq!(s.e_tilde, 0.0);
        assert_eq!(s.rank_c, 0);
    }

    #[test]
    fn exact_limit() {
        let a = random_spd(20, 0.8, 1);
        let s = build_two_level(&a, 6, 0.0, SchemeKind::SecondOrderFull).unwrap();
        assert_eq!(s.fine(), 0);
        for scheme in SchemeKind::ALL {
            assert!((dense_condition(&precond_matrix(&s, scheme).unwrap()) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn conditions_match_dense() {
        let a = random_spd(40, 0.8, 3);
        let s = build_two_level(&a, 10, 0.3, SchemeKind::SecondOrderFull).unwrap();
        assert!(s.fine() > 0 && s.e_tilde > 0.0 && s.e_tilde < 1.0);
        let k1 = dense_condition(&precond_matrix(&s, SchemeKind::FirstOrder).unwrap());
        let k2 = dense_condition(&precond_matrix(&s, SchemeKind::SecondOrderFull).unwrap());
        assert!((k1 - cond_first(&s)).abs() <= 1e-8 * k1, "{k1} {}", cond_first(&s));
        assert!((k2 - cond_second(&s)).abs() <= 1e-8 * k2, "{k2} {}", cond_second(&s));
        assert!(s.exact_reconstruction_error() <= 1e-12 * spectral_norm(&a));
    }

    #[test]
    fn slope_fit() {
        assert!((loglog_slope(&[1.0, 10.0, 100.0], &[2.0, 200.0, 20000.0]) - 2.0).abs() < 1e-12);
    }
}
