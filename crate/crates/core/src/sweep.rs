//! Independent experiment cells (problem × eps × scheme), run data-parallel
//! with rayon when the `parallel` feature is on and sequentially otherwise.
//! Each cell is single-threaded; results come back in input order.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::analysis::forward_error;
use crate::error::Error;
use crate::factorize::{factorize, DEFAULT_SKIP_LEVELS};
use crate::krylov::{default_maxit, pcg};
use crate::partition::{build_hierarchy, default_levels, PartitionHierarchy};
use crate::schemes::SchemeKind;
use crate::sparse::{
    high_contrast_field, laplacian_2d, laplacian_from_field, p_sequence, poisson_eigvec,
    SparseSymMatrix,
};

/// Whether [`par_map`] runs on the rayon pool.
pub const PARALLEL: bool = cfg!(feature = "parallel");

#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    seq_map(items, f)
}

/// Always sequential, for comparison with [`par_map`].
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Generated test problem: constant-coefficient Laplacian for `rho = 1`,
/// otherwise a high-contrast field (σ = 2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub d: usize,
    pub rho: f64,
    pub seed: u64,
}

impl Problem {
    pub fn matrix(&self) -> SparseSymMatrix {
        if self.rho == 1.0 {
            laplacian_2d(self.d)
        } else {
            laplacian_from_field(&high_contrast_field(self.d, self.rho, 2.0, self.seed))
        }
    }

    fn key(&self) -> (usize, u64, u64) {
        (self.d, self.rho.to_bits(), self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveSettings {
    pub tol: f64,
    pub skip_levels: usize,
    pub levels: Option<usize>,
    pub maxit: Option<usize>,
}

impl Default for SolveSettings {
    fn default() -> Self {
        SolveSettings { tol: 1e-10, skip_levels: DEFAULT_SKIP_LEVELS, levels: None, maxit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub problem: Problem,
    pub eps: f64,
    pub scheme: SchemeKind,
}

/// One row of the scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub d: usize,
    pub n: usize,
    pub rho: f64,
    pub eps: f64,
    pub scheme: SchemeKind,
    pub mu: f64,
    pub n_cg: usize,
    pub converged: bool,
    pub t_f: f64,
    pub t_s: f64,
    pub t_t: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str = "d,n,rho,eps,scheme,mu,n_cg,converged,t_f,t_s,t_t";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.4},{},{},{:.4},{:.4},{:.4}",
            self.d, self.n, self.rho, self.eps, self.scheme, self.mu, self.n_cg, self.converged,
            self.t_f, self.t_s, self.t_t
        )
    }
}

struct Prepared {
    a: SparseSymMatrix,
    h: PartitionHierarchy,
}

fn prepare(p: &Problem, settings: &SolveSettings) -> Prepared {
    let a = p.matrix();
    let levels = settings.levels.unwrap_or_else(|| default_levels(a.n()));
    let h = build_hierarchy(&a, levels);
    Prepared { a, h }
}

fn run_one(prep: &Prepared, cell: &BenchCell, settings: &SolveSettings) -> Result<BenchRow, Error> {
    let t0 = Instant::now();
    let f = factorize(&prep.a, &prep.h, cell.eps, cell.scheme, settings.skip_levels)?;
    let t_f = t0.elapsed().as_secs_f64();
    let b = vec![1.0; prep.a.n()];
    let maxit = settings.maxit.unwrap_or_else(|| default_maxit(prep.a.n()));
    let t1 = Instant::now();
    let (_, rep) = pcg(&prep.a, &b, &f, settings.tol, maxit)?;
    let t_s = t1.elapsed().as_secs_f64();
    Ok(BenchRow {
        d: cell.problem.d,
        n: prep.a.n(),
        rho: cell.problem.rho,
        eps: cell.eps,
        scheme: cell.scheme,
        mu: f.memory_ratio(&prep.a),
        n_cg: rep.iterations,
        converged: rep.converged,
        t_f,
        t_s,
        t_t: t_f + t_s,
    })
}

fn group(cells: &[BenchCell]) -> Vec<Problem> {
    let mut seen = BTreeMap::new();
    for c in cells {
        seen.entry(c.problem.key()).or_insert(c.problem);
    }
    seen.into_values().collect()
}

/// Runs every cell, sharing matrix and hierarchy between cells of the same
/// problem. With `parallel`, problems and then cells run on the rayon pool.
pub fn run_bench(cells: &[BenchCell], settings: &SolveSettings) -> Result<Vec<BenchRow>, Error> {
    run_bench_with(cells, settings, PARALLEL)
}

/// [`run_bench`] with an explicit choice of executor.
pub fn run_bench_with(
    cells: &[BenchCell],
    settings: &SolveSettings,
    parallel: bool,
) -> Result<Vec<BenchRow>, Error> {
    let problems = group(cells);
    let prepared: Vec<Prepared> = if parallel {
        par_map(&problems, |p| prepare(p, settings))
    } else {
        seq_map(&problems, |p| prepare(p, settings))
    };
    let index: BTreeMap<_, _> = problems.iter().enumerate().map(|(i, p)| (p.key(), i)).collect();
    let job = |c: &BenchCell| run_one(&prepared[index[&c.problem.key()]], c, settings);
    let rows = if parallel { par_map(cells, job) } else { seq_map(cells, job) };
    rows.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardErrorRow {
    pub scheme: SchemeKind,
    pub eps: f64,
    pub p: usize,
    pub lambda: f64,
    pub error: f64,
}

impl ForwardErrorRow {
    pub const CSV_HEADER: &'static str = "scheme,eps,p,lambda,error";

    pub fn csv(&self) -> String {
        format!("{},{},{},{:e},{:e}", self.scheme, self.eps, self.p, self.lambda, self.error)
    }
}

/// `‖(I − MA)v_λp‖₂` on the constant-coefficient Laplacian for every mode
/// `p ∈ ⌊1.25ᵏ⌋ ≤ d`, per `(scheme, eps)`.
pub fn forward_error_sweep(
    d: usize,
    eps_list: &[f64],
    schemes: &[SchemeKind],
    settings: &SolveSettings,
) -> Result<Vec<ForwardErrorRow>, Error> {
    let prep = prepare(&Problem { d, rho: 1.0, seed: 0 }, settings);
    let modes = p_sequence(d);
    let mut configs = Vec::new();
    for &scheme in schemes {
        for &eps in eps_list {
            configs.push((scheme, eps));
        }
    }
    let per = par_map(&configs, |&(scheme, eps)| -> Result<Vec<ForwardErrorRow>, Error> {
        let f = factorize(&prep.a, &prep.h, eps, scheme, settings.skip_levels)?;
        Ok(modes
            .iter()
            .map(|&p| {
                let (v, lambda) = poisson_eigvec(d, p);
                ForwardErrorRow { scheme, eps, p, lambda, error: forward_error(&f, &prep.a, &v) }
            })
            .collect())
    });
    let mut rows = Vec::new();
    for r in per {
        rows.extend(r?);
    }
    Ok(rows)
}
