//! Self-check suites over random instances, shared by the CLI `verify`
//! command and the test suite.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::{
    build_two_level, cond_first, cond_second, make_theorem_instance, precond_matrix, random_spd,
    rate_identity, superfine_residual_prediction, theorem_harness_with,
};
use crate::dense::sym_eigenvalues;
use crate::partition::build_hierarchy;
use crate::schemes::SchemeKind;
use crate::sparse::{high_contrast_field, laplacian_2d, laplacian_from_field};
use crate::sweep::par_map;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    CondOracle,
    SuperfineStructure,
    RateIdentity,
    Theorem,
    SpdPreservation,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::CondOracle,
        Suite::SuperfineStructure,
        Suite::RateIdentity,
        Suite::Theorem,
        Suite::SpdPreservation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::CondOracle => "cond-oracle",
            Suite::SuperfineStructure => "superfine-structure",
            Suite::RateIdentity => "rate-identity",
            Suite::Theorem => "theorem",
            Suite::SpdPreservation => "spd-preservation",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Suite::ALL.iter().map(|x| x.name()).collect();
                format!("unknown suite `{s}` (expected one of {})", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Multiplier on the error-correction term in the theorem suite. `1.0` is
    /// the correct second-order system; `-1.0` flips the sign of `Ẽ`.
    pub correction_sign: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { correction_sign: 1.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteResult {
    pub suite: Suite,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: Suite, opts: &VerifyOptions) -> SuiteResult {
    let (passed, detail) = match suite {
        Suite::CondOracle => cond_oracle(),
        Suite::SuperfineStructure => superfine_structure(),
        Suite::RateIdentity => rate_sweep(),
        Suite::Theorem => theorem_batch(opts.correction_sign),
        Suite::SpdPreservation => spd_preservation(),
    };
    SuiteResult { suite, passed, detail }
}

/// `(n, leading block, eps, seed)` for the `i`-th random two-level setup.
pub fn setup_params(i: usize) -> (usize, usize, f64, u64) {
    let n = 40 + (i * 13) % 61;
    let p = 10 + (i * 7) % 21;
    let eps = [0.05, 0.2, 0.5][i % 3];
    (n, p, eps, 1000 + i as u64)
}

/// Worst relative mismatch of κ₁, κ₂ against dense eigenvalues, and the worst
/// `|λ_max(L₂⁻¹AL₂⁻ᵀ) − 1|`, over `count` setups.
pub fn cond_oracle_errors(count: usize) -> Result<(f64, f64), String> {
    let per: Vec<Result<(f64, f64), String>> = par_map(&(0..count).collect::<Vec<_>>(), |&i| {
        let (n, p, eps, seed) = setup_params(i);
        let a = random_spd(n, 0.9, seed);
        let s = build_two_level(&a, p, eps, SchemeKind::SecondOrderFull).map_err(|e| e.to_string())?;
        let ev1 = sym_eigenvalues(&precond_matrix(&s, SchemeKind::FirstOrder).map_err(|e| e.to_string())?);
        let ev2 = sym_eigenvalues(&precond_matrix(&s, SchemeKind::SecondOrderFull).map_err(|e| e.to_string())?);
        let k1 = ev1[ev1.len() - 1] / ev1[0];
        let k2 = ev2[ev2.len() - 1] / ev2[0];
        let rel = ((k1 - cond_first(&s)).abs() / k1).max((k2 - cond_second(&s)).abs() / k2);
        Ok((rel, (ev2[ev2.len() - 1] - 1.0).abs()))
    });
    let mut worst = (0.0f64, 0.0f64);
    for r in per {
        let (a, b) = r?;
        worst = (worst.0.max(a), worst.1.max(b));
    }
    Ok(worst)
}

fn cond_oracle() -> (bool, String) {
    match cond_oracle_errors(50) {
        Ok((rel, lmax)) => (
            rel <= 1e-8 && lmax <= 1e-10,
            format!("50 setups: max relative κ error {rel:.2e}, max |λ_max − 1| {lmax:.2e}"),
        ),
        Err(e) => (false, e),
    }
}

/// Worst entrywise gap between `L₃⁻¹AL₃⁻ᵀ − I` and its predicted structure.
pub fn superfine_structure_error(count: usize) -> Result<f64, String> {
    let per: Vec<Result<f64, String>> = par_map(&(0..count).collect::<Vec<_>>(), |&i| {
        let (n, p, _, seed) = setup_params(i);
        let a = random_spd(n, 0.8, seed + 5000);
        let s = build_two_level(&a, p, 0.3, SchemeKind::SecondOrderSuperfine).map_err(|e| e.to_string())?;
        let mut k = precond_matrix(&s, SchemeKind::SecondOrderSuperfine).map_err(|e| e.to_string())?;
        for j in 0..k.rows() {
            k[(j, j)] -= 1.0;
        }
        let pred = superfine_residual_prediction(&s).map_err(|e| e.to_string())?;
        Ok(k.sub(&pred).max_abs())
    });
    per.into_iter().try_fold(0.0f64, |acc, r| r.map(|v| acc.max(v)))
}

fn superfine_structure() -> (bool, String) {
    match superfine_structure_error(20) {
        Ok(err) => (err <= 1e-10, format!("20 setups: max entrywise gap {err:.2e}")),
        Err(e) => (false, e),
    }
}

/// `ẽ = 0.05, 0.10, …, 0.95`
pub fn rate_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

fn rate_sweep() -> (bool, String) {
    let gap = rate_grid().into_iter().map(|e| rate_identity(e).2).fold(0.0, f64::max);
    (gap <= 1e-14, format!("19 values: max |R₁² − R₂| {gap:.2e}"))
}

/// `(max deviation over valid instances, number of broken instances above 1e-4)`.
pub fn theorem_stats(count: usize, sign: f64) -> Result<(f64, usize), String> {
    let per: Vec<Result<(f64, bool), String>> = par_map(&(0..count).collect::<Vec<_>>(), |&i| {
        let inst = make_theorem_instance(8, 4, 7000 + i as u64);
        let ok = theorem_harness_with(&inst, 1e-10, sign).map_err(|e| e.to_string())?;
        let bad = theorem_harness_with(&inst.with_broken_constraint(), 1e-10, sign)
            .map_err(|e| e.to_string())?;
        Ok((ok.max_deviation, bad.max_deviation > 1e-4))
    });
    let mut worst = 0.0f64;
    let mut violated = 0;
    for r in per {
        let (d, v) = r?;
        worst = worst.max(d);
        violated += v as usize;
    }
    Ok((worst, violated))
}

fn theorem_batch(sign: f64) -> (bool, String) {
    match theorem_stats(100, sign) {
        Ok((dev, violated)) => (
            dev <= 1e-8 && violated >= 90,
            format!("100 instances: max deviation {dev:.2e}; negative control fired on {violated}/100"),
        ),
        Err(e) => (false, format!("CG failed: {e}")),
    }
}

fn spd_preservation() -> (bool, String) {
    let mut cases = Vec::new();
    for d in [24usize, 40] {
        for rho in [1.0, 100.0] {
            for eps in [0.5, 0.1, 0.01] {
                for scheme in SchemeKind::ALL {
                    cases.push((d, rho, eps, scheme));
                }
            }
        }
    }
    let per = par_map(&cases, |&(d, rho, eps, scheme)| {
        let a = if rho == 1.0 {
            laplacian_2d(d)
        } else {
            laplacian_from_field(&high_contrast_field(d, rho, 2.0, 42))
        };
        let h = build_hierarchy(&a, crate::partition::default_levels(a.n()));
        crate::factorize(&a, &h, eps, scheme, 0).map(|_| ()).map_err(|e| {
            format!("d={d} rho={rho} eps={eps} {scheme}: {e}")
        })
    });
    let failures: Vec<String> = per.into_iter().filter_map(Result::err).collect();
    if failures.is_empty() {
        (true, format!("{} factorizations, every Cholesky succeeded", cases.len()))
    } else {
        (false, failures.join("; "))
    }
}
