//! CG residuals on the first- and second-order two-level systems.
//!
//! With `‖C‖₂ < 1` and `Cᵀb₁ = 0`, CG on `A₁ = [I C; Cᵀ I]` produces at step
//! `2k` exactly the residual CG on `A₂ = [I 0; 0 I − CᵀC]` produces at step `k`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::gaussian_matrix;
use crate::dense::{norm2, spectral_norm, DenseMatrix, PivotedQr, StopRule};
use crate::error::KrylovError;
use crate::krylov::{pcg_observed, Identity};

#[derive(Debug, Clone)]
pub struct TheoremInstance {
    pub c: DenseMatrix,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    /// `m1 ≤ m2`: no nonzero `b₁` with `Cᵀb₁ = 0` exists for generic `C`, so `b₁ = 0`.
    pub infeasible: bool,
}

impl TheoremInstance {
    pub fn b(&self) -> Vec<f64> {
        self.b1.iter().chain(&self.b2).copied().collect()
    }

    /// `I − CᵀC`
    pub fn f(&self) -> DenseMatrix {
        let mut f = self.c.gram();
        f.scale(-1.0);
        for i in 0..f.rows() {
            f[(i, i)] += 1.0;
        }
        f
    }

    /// Copy with `b₁ ← b₁ + C·1`, which breaks `Cᵀb₁ = 0`.
    pub fn with_broken_constraint(&self) -> Self {
        let ones = vec![1.0; self.c.cols()];
        let shift = self.c.matvec(&ones);
        let b1 = self.b1.iter().zip(&shift).map(|(x, s)| x + s).collect();
        TheoremInstance { b1, ..self.clone() }
    }
}

/// Random `C` (`m1 × m2`, scaled to `‖C‖₂ = 0.8`), random `b₂`, and a random
/// `b₁` projected onto the null space of `Cᵀ`.
pub fn make_theorem_instance(m1: usize, m2: usize, seed: u64) -> TheoremInstance {
    assert!(m1 >= 1 && m2 >= 1, "block sizes must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = gaussian_matrix(m1, m2, &mut rng);
    let s = spectral_norm(&c);
    c.scale(0.8 / s);
    let b2: Vec<f64> = (0..m2).map(|_| StandardNormal.sample(&mut rng)).collect();
    let raw: Vec<f64> = (0..m1).map(|_| StandardNormal.sample(&mut rng)).collect();
    let infeasible = m1 <= m2;
    let b1 = if infeasible { vec![0.0; m1] } else { project_out(&c, raw) };
    TheoremInstance { c, b1, b2, infeasible }
}

/// `x − Q Qᵀ x` with `Q` an orthonormal basis of `range(C)`.
fn project_out(c: &DenseMatrix, mut x: Vec<f64>) -> Vec<f64> {
    let qr = PivotedQr::compute(c, StopRule { coarse: 1e-14, fine2: None }).expect("finite");
    let r = qr.rank_c();
    let refl = qr.reflectors();
    refl.apply_qt(&mut x);
    x[..r].iter_mut().for_each(|v| *v = 0.0);
    refl.apply_q(&mut x);
    x
}

/// `[[I, (1−s)C], [(1−s)Cᵀ, I − (2s − s²)CᵀC]]`: the first-order system `A₁`
/// after the unit lower-triangular correction `[[I, 0], [−sCᵀ, I]]`.
/// `s = 1` gives `A₂`; any other `s` is a deliberately wrong correction.
pub fn second_order_system(c: &DenseMatrix, s: f64) -> DenseMatrix {
    let (m1, m2) = c.shape();
    let mut a = DenseMatrix::identity(m1 + m2);
    let mut off = c.clone();
    off.scale(1.0 - s);
    a.set_submatrix(0, m1, &off);
    a.set_submatrix(m1, 0, &off.transpose());
    let g = c.gram();
    for j in 0..m2 {
        for i in 0..m2 {
            a[(m1 + i, m1 + j)] -= (2.0 * s - s * s) * g[(i, j)];
        }
    }
    a
}

fn first_order_system(c: &DenseMatrix) -> DenseMatrix {
    second_order_system(c, 0.0)
}

#[derive(Debug, Clone, Default)]
pub struct TheoremOutcome {
    /// `‖r⁽¹⁾_k‖₂ / ‖b‖₂`
    pub residuals1: Vec<f64>,
    /// `‖r⁽²⁾_k‖₂ / ‖b‖₂`
    pub residuals2: Vec<f64>,
    /// `max_k ‖r⁽¹⁾_{2k} − r⁽²⁾_k‖₂ / ‖b‖₂`
    pub max_deviation: f64,
}

impl TheoremOutcome {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "k,r1,r2")?;
        let len = self.residuals1.len().max(self.residuals2.len());
        for k in 0..len {
            let f = |v: &Vec<f64>| v.get(k).map(|x| format!("{x:e}")).unwrap_or_default();
            writeln!(w, "{k},{},{}", f(&self.residuals1), f(&self.residuals2))?;
        }
        Ok(())
    }
}

pub fn theorem_harness(inst: &TheoremInstance, tol: f64) -> Result<TheoremOutcome, KrylovError> {
    theorem_harness_with(inst, tol, 1.0)
}

/// Harness with the correction `s·Cᵀ` (`s = 1` is the correct one).
pub fn theorem_harness_with(
    inst: &TheoremInstance,
    tol: f64,
    s: f64,
) -> Result<TheoremOutcome, KrylovError> {
    let b = inst.b();
    let bnorm = norm2(&b);
    let maxit = 4 * b.len() + 10;
    let mut r1: Vec<Vec<f64>> = Vec::new();
    let mut r2: Vec<Vec<f64>> = Vec::new();
    let (_, rep1) = pcg_observed(&first_order_system(&inst.c), &b, &Identity, tol, maxit, |_, r| {
        r1.push(r.to_vec())
    })?;
    let (_, rep2) = pcg_observed(&second_order_system(&inst.c, s), &b, &Identity, tol, maxit, |_, r| {
        r2.push(r.to_vec())
    })?;
    let mut dev: f64 = 0.0;
    if bnorm > 0.0 {
        for (k, rk) in r2.iter().enumerate() {
            let Some(r1k) = r1.get(2 * k) else { break };
            let d: Vec<f64> = r1k.iter().zip(rk).map(|(x, y)| x - y).collect();
            dev = dev.max(norm2(&d) / bnorm);
        }
    }
    Ok(TheoremOutcome {
        residuals1: rep1.residual_history,
        residuals2: rep2.residual_history,
        max_deviation: dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coupling() {
        let inst = TheoremInstance {
            c: DenseMatrix::zeros(3, 2),
            b1: vec![1.0, 2.0, 3.0],
            b2: vec![-1.0, 0.5],
            infeasible: false,
        };
        let out = theorem_harness(&inst, 1e-10).unwrap();
        assert_eq!(out.residuals1.len(), 2);
        assert_eq!(out.residuals2.len(), 2);
        assert_eq!(out.max_deviation, 0.0);
    }

    #[test]
    fn instance_contract() {
        let inst = make_theorem_instance(6, 3, 11);
        assert!((spectral_norm(&inst.c) - 0.8).abs() < 1e-12);
        let ctb = inst.c.transpose().matvec(&inst.b1);
        assert!(norm2(&ctb) <= 1e-13 * norm2(&inst.b1));
        assert!(make_theorem_instance(3, 3, 1).infeasible);
    }

    #[test]
    fn residual_equality_and_control() {
        let inst = make_theorem_instance(8, 4, 5);
        assert!(theorem_harness(&inst, 1e-10).unwrap().max_deviation <= 1e-8);
        let broken = inst.with_broken_constraint();
        assert!(theorem_harness(&broken, 1e-10).unwrap().max_deviation > 1e-4);
    }

    #[test]
    fn systems() {
        let c = DenseMatrix::from_rows(&[&[0.5], &[0.0]]);
        let a2 = second_order_system(&c, 1.0);
        assert_eq!(a2[(0, 2)], 0.0);
        assert!((a2[(2, 2)] - 0.75).abs() < 1e-15);
    }
}
