// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use spand::analysis::verify::{run_suite, Suite, SuiteResult, VerifyOptions};
use spand::krylov::default_maxit;
use spand::sweep::{forward_error_sweep, run_bench, BenchCell, Problem, SolveSettings};
use spand::{
    build_hierarchy, default_levels, factorize, jacobi_prescale, pcg, read_matrix_market,
    Error, FactorError, SchemeKind, SparseSymMatrix,
};

const SCHEMA: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "spand", version, about = "Sparsified nested dissection with second-order error correction")]
struct Cli {
    /// Directory for output files when `--out` is not given (stdout otherwise).
    #[arg(long, global = true, env = "SPAND_OUT_DIR", value_name = "DIR")]
    out_dir: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Factorize one matrix and solve `A x = b` (b = ones) with PCG.
    Solve(SolveArgs),
    /// Scaling table over grid sizes, tolerances and schemes.
    Bench(BenchArgs),
    /// Forward errors `‖(I − MA)v‖` on Laplacian eigenvectors.
    ForwardError(ForwardArgs),
    /// Run the self-check suites.
    Verify(VerifyArgs),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// PCG relative residual tolerance.
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Number of leading elimination levels without sparsification.
    #[arg(long, default_value_t = spand::factorize::DEFAULT_SKIP_LEVELS)]
    skip_levels: usize,
    /// Nested-dissection depth (default: nearest integer to log₂(n/25)).
    #[arg(long)]
    levels: Option<usize>,
    /// PCG iteration cap (default: 10·√n + 100).
    #[arg(long)]
    maxit: Option<usize>,
    /// Write here instead of stdout / the output directory.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Output format (default: JSON for `solve`, CSV for the sweeps).
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Matrix Market file (`matrix coordinate real symmetric`).
    #[arg(long, conflicts_with = "laplacian", required_unless_present = "laplacian")]
    matrix: Option<PathBuf>,
    /// Generate a d × d grid Laplacian instead of reading a file.
    #[arg(long, value_name = "D")]
    laplacian: Option<usize>,
    /// Coefficient contrast for the generated problem (1 = constant).
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    eps: f64,
    #[arg(long, default_value_t = SchemeKind::SecondOrderFull)]
    scheme: SchemeKind,
    /// Symmetric Jacobi prescaling (default: on for files, off for generated).
    #[arg(long, overrides_with = "no_jacobi")]
    jacobi: bool,
    #[arg(long, overrides_with = "jacobi")]
    no_jacobi: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Grid sizes.
    #[arg(long = "d", value_delimiter = ',', num_args = 0..)]
    d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    rho: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "first,second-full,second-superfine")]
    scheme: Vec<SchemeKind>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct ForwardArgs {
    #[arg(long = "d", default_value_t = 200)]
    d: usize,
    /// Must be 1: eigenvectors are known only for the constant-coefficient grid.
    #[arg(long, default_value_t = 1.0)]
    rho: f64,
    #[arg(long, value_delimiter = ',', default_value = "0.1,0.01")]
    eps: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "first,second-full,second-superfine")]
    scheme: Vec<SchemeKind>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Run only these suites.
    #[arg(long, value_delimiter = ',')]
    only: Vec<Suite>,
    /// Flip the sign of the error-correction term (mutation smoke test).
    #[arg(long, hide = true)]
    inject_sign_flip: bool,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 1, message: message.into() }
    }

    fn input(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }

    fn numerical(message: impl Into<String>) -> Self {
        Failure { code: 3, message: message.into() }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::Sparse(_) => Failure::input(message),
            Error::Factor(FactorError::Io(_) | FactorError::Format(_)) => Failure::input(message),
            Error::Factor(FactorError::InvalidParameter(_)) => Failure::usage(message),
            Error::Dense(_) | Error::Factor(_) | Error::Krylov(_) => Failure::numerical(message),
        }
    }
}

impl From<FactorError> for Failure {
    fn from(e: FactorError) -> Self {
        Error::from(e).into()
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

/// `--out`, else `$SPAND_OUT_DIR/<default_name>`, else stdout.
fn sink(out: Option<&Path>, out_dir: Option<&Path>, default_name: &str) -> Result<Box<dyn Write>, Failure> {
    let path = match (out, out_dir) {
        (Some(p), _) => p.to_path_buf(),
        (None, Some(dir)) => {
            std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
            dir.join(default_name)
        }
        (None, None) => return Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    };
    let f = File::create(&path).map_err(|e| io_failure(&path, e))?;
    Ok(Box::new(BufWriter::new(f)))
}

fn write_json<T: Serialize>(mut w: Box<dyn Write>, value: &T) -> Result<(), Failure> {
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::input(e.to_string()))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| Failure::input(e.to_string()))
}

fn write_csv<T: Serialize>(w: Box<dyn Write>, rows: &[T]) -> Result<(), Failure> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r).map_err(|e| Failure::input(e.to_string()))?;
    }
    wr.flush().map_err(|e| Failure::input(e.to_string()))
}

fn check_eps(eps: &[f64]) -> Result<(), Failure> {
    match eps.iter().find(|e| !(0.0..=1.0).contains(*e)) {
        Some(e) => Err(Failure::usage(format!("eps = {e} is outside [0, 1]"))),
        None => Ok(()),
    }
}

fn settings(c: &Common) -> Result<SolveSettings, Failure> {
    if !(c.tol > 0.0) {
        return Err(Failure::usage(format!("tol = {} must be positive", c.tol)));
    }
    Ok(SolveSettings { tol: c.tol, skip_levels: c.skip_levels, levels: c.levels, maxit: c.maxit })
}

#[derive(Serialize)]
struct SolveOutput {
    schema: u32,
    command: &'static str,
    source: String,
    n: usize,
    nnz: usize,
    levels: usize,
    jacobi: bool,
    eps: f64,
    scheme: SchemeKind,
    tol: f64,
    skip_levels: usize,
    mu: f64,
    n_cg: usize,
    converged: bool,
    true_residual: f64,
    t_f: f64,
    t_s: f64,
    t_t: f64,
    residual_history: Vec<f64>,
    levels_diagnostics: serde_json::Value,
}

fn cmd_solve(args: SolveArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    check_eps(&[args.eps])?;
    let s = settings(&args.common)?;
    let (a, source, from_file) = match (&args.matrix, args.laplacian) {
        (Some(path), _) => {
            let a = read_matrix_market(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
            (a, path.display().to_string(), true)
        }
        (None, Some(d)) => {
            if d < 2 {
                return Err(Failure::usage("--laplacian needs d ≥ 2"));
            }
            if !(args.rho >= 1.0) {
                return Err(Failure::usage(format!("rho = {} must be ≥ 1", args.rho)));
            }
            let p = Problem { d, rho: args.rho, seed: args.seed };
            (p.matrix(), format!("laplacian d={d} rho={} seed={}", args.rho, args.seed), false)
        }
        (None, None) => return Err(Failure::usage("one of --matrix or --laplacian is required")),
    };
    let jacobi = if args.jacobi {
        true
    } else if args.no_jacobi {
        false
    } else {
        from_file
    };
    let b = vec![1.0; a.n()];
    let (a, b): (SparseSymMatrix, Vec<f64>) = if jacobi {
        let (a2, b2, _) = jacobi_prescale(&a, &b).map_err(|e| Failure::input(e.to_string()))?;
        (a2, b2)
    } else {
        (a, b)
    };

    let levels = s.levels.unwrap_or_else(|| default_levels(a.n()));
    let h = build_hierarchy(&a, levels);
    let t0 = Instant::now();
    let f = factorize(&a, &h, args.eps, args.scheme, s.skip_levels).map_err(Error::from)?;
    let t_f = t0.elapsed().as_secs_f64();
    let maxit = s.maxit.unwrap_or_else(|| default_maxit(a.n()));
    let t1 = Instant::now();
    let (_, rep) = pcg(&a, &b, &f, s.tol, maxit).map_err(Error::from)?;
    let t_s = t1.elapsed().as_secs_f64();
    if !rep.converged {
        eprintln!("warning: PCG did not reach tol {} within {maxit} iterations", s.tol);
    }
    let out = SolveOutput {
        schema: SCHEMA,
        command: "solve",
        source,
        n: a.n(),
        nnz: a.nnz(),
        levels,
        jacobi,
        eps: args.eps,
        scheme: args.scheme,
        tol: s.tol,
        skip_levels: s.skip_levels,
        mu: f.memory_ratio(&a),
        n_cg: rep.iterations,
        converged: rep.converged,
        true_residual: rep.true_residual,
        t_f,
        t_s,
        t_t: t_f + t_s,
        residual_history: rep.residual_history.clone(),
        levels_diagnostics: f.diagnostics_json(),
    };
    match args.common.format.unwrap_or(Format::Json) {
        Format::Json => write_json(sink(args.common.out.as_deref(), out_dir, "solve.json")?, &out),
        Format::Csv => {
            let mut w = sink(args.common.out.as_deref(), out_dir, "solve.csv")?;
            rep.write_residual_csv(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| Failure::input(e.to_string()))
        }
    }
}

fn cmd_bench(args: BenchArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    if args.d.is_empty() {
        return Err(Failure::usage("bench needs at least one grid size (--d)"));
    }
    if let Some(d) = args.d.iter().find(|&&d| d < 2) {
        return Err(Failure::usage(format!("grid size d = {d} must be ≥ 2")));
    }
    if args.scheme.is_empty() || args.eps.is_empty() || args.rho.is_empty() {
        return Err(Failure::usage("bench needs at least one scheme, eps and rho"));
    }
    if let Some(r) = args.rho.iter().find(|r| !(**r >= 1.0)) {
        return Err(Failure::usage(format!("rho = {r} must be ≥ 1")));
    }
    check_eps(&args.eps)?;
    let s = settings(&args.common)?;
    let mut cells = Vec::new();
    for &d in &args.d {
        for &rho in &args.rho {
            for &eps in &args.eps {
                for &scheme in &args.scheme {
                    cells.push(BenchCell { problem: Problem { d, rho, seed: args.seed }, eps, scheme });
                }
            }
        }
    }
    let rows = run_bench(&cells, &s)?;
    for r in rows.iter().filter(|r| !r.converged) {
        eprintln!("warning: d={} rho={} eps={} {} did not converge", r.d, r.rho, r.eps, r.scheme);
    }
    match args.common.format.unwrap_or(Format::Csv) {
        Format::Csv => write_csv(sink(args.common.out.as_deref(), out_dir, "bench.csv")?, &rows),
        Format::Json => write_json(
            sink(args.common.out.as_deref(), out_dir, "bench.json")?,
            &serde_json::json!({ "schema": SCHEMA, "command": "bench", "rows": rows }),
        ),
    }
}

fn cmd_forward_error(args: ForwardArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    if args.rho != 1.0 {
        return Err(Failure::usage(format!(
            "forward-error needs rho = 1 (eigenvectors are known only for the constant field), got {}",
            args.rho
        )));
    }
    if args.d < 2 {
        return Err(Failure::usage("grid size must be ≥ 2"));
    }
    if args.scheme.is_empty() || args.eps.is_empty() {
        return Err(Failure::usage("forward-error needs at least one scheme and eps"));
    }
    check_eps(&args.eps)?;
    let s = settings(&args.common)?;
    let rows = forward_error_sweep(args.d, &args.eps, &args.scheme, &s)?;
    match args.common.format.unwrap_or(Format::Csv) {
        Format::Csv => write_csv(sink(args.common.out.as_deref(), out_dir, "forward_error.csv")?, &rows),
        Format::Json => write_json(
            sink(args.common.out.as_deref(), out_dir, "forward_error.json")?,
            &serde_json::json!({ "schema": SCHEMA, "command": "forward-error", "d": args.d, "rows": rows }),
        ),
    }
}

fn cmd_verify(args: VerifyArgs, out_dir: Option<&Path>) -> Result<(), Failure> {
    let suites = if args.only.is_empty() { Suite::ALL.to_vec() } else { args.only };
    let opts = VerifyOptions { correction_sign: if args.inject_sign_flip { -1.0 } else { 1.0 } };
    let mut results: Vec<SuiteResult> = Vec::new();
    for suite in suites {
        let r = run_suite(suite, &opts);
        eprintln!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.suite, r.detail);
        results.push(r);
    }
    if args.out.is_some() || out_dir.is_some() {
        write_json(
            sink(args.out.as_deref(), out_dir, "verify.json")?,
            &serde_json::json!({ "schema": SCHEMA, "command": "verify", "results": results }),
        )?;
    }
    match results.iter().find(|r| !r.passed) {
        Some(r) => Err(Failure::numerical(format!("suite `{}` failed: {}", r.suite, r.detail))),
        None => Ok(()),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let out_dir = cli.out_dir.as_deref();
    match cli.command {
        Command::Solve(a) => cmd_solve(a, out_dir),
        Command::Bench(a) => cmd_bench(a, out_dir),
        Command::ForwardError(a) => cmd_forward_error(a, out_dir),
        Command::Verify(a) => cmd_verify(a, out_dir),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
