//! Preconditioned Conjugate Gradient.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dense::{dot, norm2, DenseMatrix};
use crate::error::KrylovError;
use crate::schemes::SchemeKind;
use crate::sparse::SparseSymMatrix;

pub trait LinearOperator {
    fn dim(&self) -> usize;
    /// `y = A x`
    fn apply(&self, x: &[f64], y: &mut [f64]);
}

impl LinearOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv(x, y);
    }
}

impl LinearOperator for DenseMatrix {
    fn dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.iter_mut().for_each(|v| *v = 0.0);
        self.gemv_acc(1.0, x, y);
    }
}

pub trait Preconditioner {
    /// `z = M r`
    fn precondition(&self, r: &[f64], z: &mut [f64]);
}

/// `M = I`
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl Preconditioner for Identity {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

impl<F: Fn(&[f64], &mut [f64])> Preconditioner for F {
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        self(r, z)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖r_k‖₂ / ‖b‖₂` of the recursively updated residual, starting at 1.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    /// `‖b − A x‖₂ / ‖b‖₂` recomputed from the returned iterate.
    pub true_residual: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve_seconds: Option<f64>,
}

impl SolveReport {
    /// CSV of `(iteration, relative residual)`.
    pub fn write_residual_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "iteration,relative_residual")?;
        for (k, r) in self.residual_history.iter().enumerate() {
            writeln!(w, "{k},{r:e}")?;
        }
        Ok(())
    }
}

/// PCG from a zero initial guess; stops once `‖r_k‖/‖b‖ < tol` or after `maxit`
/// iterations (returning `converged = false`).
pub fn pcg<A, M>(
    a: &A,
    b: &[f64],
    m: &M,
    tol: f64,
    maxit: usize,
) -> Result<(Vec<f64>, SolveReport), KrylovError>
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
{
    pcg_observed(a, b, m, tol, maxit, |_, _| {})
}

/// [`pcg`] calling `observer(k, r_k)` with the residual vector after every
/// iteration (and once for `k = 0`).
pub fn pcg_observed<A, M, O>(
    a: &A,
    b: &[f64],
    m: &M,
    tol: f64,
    maxit: usize,
    mut observer: O,
) -> Result<(Vec<f64>, SolveReport), KrylovError>
where
    A: LinearOperator + ?Sized,
    M: Preconditioner + ?Sized,
    O: FnMut(usize, &[f64]),
{
    let n = a.dim();
    if b.len() != n {
        return Err(KrylovError::DimensionMismatch { expected: n, found: b.len() });
    }
    if !(tol > 0.0) {
        return Err(KrylovError::InvalidParameter(format!("tol = {tol} must be positive")));
    }
    let mut x = vec![0.0; n];
    let bnorm = norm2(b);
    let mut report = SolveReport { residual_history: vec![1.0], ..Default::default() };
    observer(0, b);
    if bnorm == 0.0 {
        report.residual_history[0] = 0.0;
        report.converged = true;
        return Ok((x, report));
    }
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    m.precondition(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for k in 1..=maxit {
        a.apply(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(KrylovError::Breakdown { iteration: k, curvature });
        }
        let alpha = rz / curvature;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rel = norm2(&r) / bnorm;
        report.residual_history.push(rel);
        report.iterations = k;
        observer(k, &r);
        if rel < tol {
            report.converged = true;
            break;
        }
        m.precondition(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    a.apply(&x, &mut ap);
    let res: Vec<f64> = b.iter().zip(&ap).map(|(bi, ai)| bi - ai).collect();
    report.true_residual = norm2(&res) / bnorm;
    Ok((x, report))
}

/// `(√κ − 1)/(√κ + 1)`
pub fn cg_bound_rate(kappa: f64) -> f64 {
    let s = kappa.sqrt();
    (s - 1.0) / (s + 1.0)
}

/// `10·√n + 100`
pub fn default_maxit(n: usize) -> usize {
    (10.0 * (n as f64).sqrt()) as usize + 100
}
