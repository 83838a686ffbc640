//! `parabolic-orbits`: single solves, continuation sweeps, test-path tables
//! and verification of stored trajectories.

mod output;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use parabolic_orbits::action::{odd_rational, simplest_odd_rational_beta, test_trajectory_y_axis};
use parabolic_orbits::continuation::{node_count, run_sweep, solve_horizon, SweepConfig, DEFAULT_WINDOW};
use parabolic_orbits::diagnostics::diagnose;
use parabolic_orbits::{
    action, bound_constants, optimal_beta, BoundConstants, Error, MinimizeOptions, MinimizeReport, OddTrajectory, ProblemSpec, SCHEMA,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

const THREADS_ENV: &str = "PARABOLIC_ORBITS_THREADS";
const GRADIENT_SAMPLES: usize = 8;

#[derive(Parser)]
#[command(
    name = "parabolic-orbits",
    version,
    about = "Odd parabolic orbits of the two-center problem by direct minimization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the action for one horizon.
    Solve(SolveArgs),
    /// Continuation over several horizons.
    Sweep(SweepArgs),
    /// Tabulate the action of y-axis power paths against the certificate.
    Testfn(TestfnArgs),
    /// Recompute diagnostics for a stored trajectory CSV.
    Verify(VerifyArgs),
}

#[derive(Args, Clone)]
struct ProblemArgs {
    /// Potential exponent, 0 < alpha < 2.
    #[arg(long)]
    alpha: f64,
    /// Mass ratio; the odd-symmetric machinery needs 0.5.
    #[arg(long, default_value_t = 0.5)]
    mu: f64,
}

#[derive(Args, Clone)]
struct SolverArgs {
    #[arg(long, default_value_t = 16)]
    nodes_per_unit: usize,
    /// Initial and certificate exponent (defaults: 2/(2+alpha) and the
    /// simplest admissible odd rational).
    #[arg(long, value_parser = parse_beta)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    grad_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long)]
    n: f64,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    n_list: Vec<f64>,
    /// Comparison window `a,b` for successive minimizers.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    window: Option<Vec<f64>>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct TestfnArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_delimiter = ',', default_value = "10,20,40,80")]
    n_list: Vec<f64>,
    /// Exponents to tabulate (default: simplest odd rational and 2/(2+alpha)).
    #[arg(long, value_delimiter = ',', value_parser = parse_beta)]
    beta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 16)]
    nodes_per_unit: usize,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    /// Trajectory CSV with header `t,x,y`.
    file: PathBuf,
    #[command(flatten)]
    problem: ProblemArgs,
    /// Certificate exponent (default: simplest admissible odd rational).
    #[arg(long, value_parser = parse_beta)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `verify_<stem>.json`; stdout only when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Accepts a decimal or a fraction such as `3/5`.
fn parse_beta(s: &str) -> std::result::Result<f64, String> {
    let parse = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    match s.split_once('/') {
        Some((l, m)) => Ok(parse(l)? / parse(m)?),
        None => parse(s),
    }
}

/// Failure carried to the top level: exit code plus machine-readable tag.
struct CliError {
    code: u8,
    kind: String,
    message: String,
}

impl CliError {
    fn parameter(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            kind: "parameter_range".into(),
            message: message.into(),
        }
    }

    /// Errors raised while reading a user-supplied file count as input errors.
    fn input(e: Error) -> Self {
        let code = match e {
            Error::Format(_) | Error::Symmetry(_) | Error::Io(_) | Error::Collision { .. } => 4,
            _ => exit_code(&e),
        };
        CliError {
            code,
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Stalled { .. } | Error::CollisionTrap { .. } | Error::MaxIters { .. } => 3,
        Error::Io(_) | Error::Format(_) => 4,
        _ => 2,
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError {
            code: exit_code(&e),
            kind: e.kind().into(),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError {
            code: 4,
            kind: "io".into(),
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            return report(CliError {
                code: 2,
                kind: "usage".into(),
                message: usage_message(&e),
            })
        }
    };
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Testfn(a) => cmd_testfn(a),
        Command::Verify(a) => cmd_verify(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

/// Clap's rendered error without the usage and help trailer, on one line.
fn usage_message(e: &clap::Error) -> String {
    let text = e.to_string();
    let lines: Vec<&str> = text
        .lines()
        .map(str::trim)
        .take_while(|l| !l.starts_with("Usage:"))
        .filter(|l| !l.is_empty())
        .collect();
    lines.join(" ")
}

fn report(e: CliError) -> ExitCode {
    let body = json!({ "schema": SCHEMA, "error": e.kind, "message": e.message, "exit_code": e.code });
    eprintln!("{body}");
    ExitCode::from(e.code)
}

fn configure_threads() -> CliResult {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&t| t > 0)
        .ok_or_else(|| CliError::parameter(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| CliError::parameter(e.to_string()))
}

fn make_spec(p: &ProblemArgs) -> CliResult<ProblemSpec> {
    let spec = ProblemSpec::new(p.alpha, p.mu)?;
    spec.require_symmetric()?;
    Ok(spec)
}

/// Certificate constants: an explicit `--beta`, else the simplest admissible
/// odd rational for this alpha.
fn certificate(alpha: f64, beta: Option<f64>) -> CliResult<BoundConstants> {
    let beta = match beta {
        Some(b) => b,
        None => {
            let (l, m) = simplest_odd_rational_beta(alpha)?;
            l as f64 / m as f64
        }
    };
    Ok(bound_constants(alpha, beta)?)
}

fn options(s: &SolverArgs) -> CliResult<MinimizeOptions> {
    let opts = MinimizeOptions {
        grad_tol: s.grad_tol,
        max_iters: s.max_iters,
        ..MinimizeOptions::default()
    };
    opts.validate()?;
    Ok(opts)
}

/// Gradient components spot-checked in diagnostics, drawn from `seed`.
fn gradient_components(seed: u64, nodes: usize) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..GRADIENT_SAMPLES)
        .map(|_| (rng.gen_range(0..nodes), rng.gen_range(0..2)))
        .collect()
}

fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> CliResult {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::from(std::io::Error::other(e)))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn label(n: f64) -> String {
    format!("{n}")
}

fn optimizer_block(r: &MinimizeReport) -> Value {
    json!({
        "converged": r.converged,
        "iterations": r.iterations,
        "action_value": r.action_value,
        "grad_norm": r.grad_norm,
        "min_center_distance": r.min_center_distance,
        "terminal_speed": r.terminal_speed,
    })
}

fn cmd_solve(a: SolveArgs) -> CliResult {
    let spec = make_spec(&a.problem)?;
    let k = certificate(spec.alpha, a.solver.beta)?;
    let beta_init = a.solver.beta.unwrap_or_else(|| optimal_beta(spec.alpha));
    let opts = options(&a.solver)?;
    let m = node_count(a.n, a.solver.nodes_per_unit)?;
    std::fs::create_dir_all(&a.solver.out)?;

    let (report, failure) = match solve_horizon(&spec, a.n, a.solver.nodes_per_unit, beta_init, &opts) {
        Ok(r) => (r, None),
        Err(e) => match e.partial_report().cloned() {
            Some(r) => (r, Some(e)),
            None => return Err(e.into()),
        },
    };

    let tag = label(a.n);
    let dir = &a.solver.out;
    report.trajectory.write_csv(create(dir, &format!("orbit_n{tag}.csv"))?)?;
    report.write_iteration_log(create(dir, &format!("iterlog_n{tag}.csv"))?)?;
    let diagnostics = diagnose(&spec, &report.trajectory, &k, &gradient_components(a.solver.seed, m))?;
    let record = json!({
        "schema": SCHEMA,
        "command": "solve",
        "params": {
            "alpha": spec.alpha,
            "mu": spec.mu,
            "n": a.n,
            "M": m,
            "nodes_per_unit": a.solver.nodes_per_unit,
            "beta_init": beta_init,
            "beta_certificate": k.beta,
            "grad_tol": opts.grad_tol,
            "max_iters": opts.max_iters,
            "seed": a.solver.seed,
        },
        "optimizer": optimizer_block(&report),
        "diagnostics": diagnostics,
    });
    write_json(dir, &format!("diag_n{tag}.json"), &record)?;
    println!(
        "{}",
        json!({ "schema": SCHEMA, "command": "solve", "n": a.n, "action": report.action_value, "converged": report.converged, "bound_margin": diagnostics.bound_margin })
    );
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_sweep(a: SweepArgs) -> CliResult {
    let spec = make_spec(&a.problem)?;
    let k = certificate(spec.alpha, a.solver.beta)?;
    let window = match a.window.as_deref() {
        None => DEFAULT_WINDOW,
        Some(&[lo, hi]) if lo < hi => (lo, hi),
        Some(w) => return Err(CliError::parameter(format!("--window needs two increasing values a,b, got {w:?}"))),
    };
    let cfg = SweepConfig {
        horizons: a.n_list.clone(),
        nodes_per_unit: a.solver.nodes_per_unit,
        beta_init: a.solver.beta.unwrap_or_else(|| optimal_beta(spec.alpha)),
        certificate: k,
        options: options(&a.solver)?,
        window,
    };
    std::fs::create_dir_all(&a.solver.out)?;
    let result = run_sweep(&spec, &cfg)?;
    let dir = &a.solver.out;

    let report_json = serde_json::to_value(&result.report).map_err(|e| CliError::from(std::io::Error::other(e)))?;
    write_json(dir, "sweep.json", &report_json)?;
    result.report.write_csv(create(dir, "sweep.csv")?)?;
    output::write_an_vs_n(create(dir, "an_vs_n.dat")?, &result.report)?;
    output::write_h_vs_n(create(dir, "h_vs_n.dat")?, &result.report)?;
    output::write_overlay(create(dir, "orbit_overlay.dat")?, &result.trajectories)?;

    let failed: Vec<Value> = result
        .failures
        .iter()
        .map(|(n, e)| json!({ "n": n, "error": e.kind(), "message": e.to_string() }))
        .collect();
    println!(
        "{}",
        json!({ "schema": SCHEMA, "command": "sweep", "rows": result.report.rows.len(), "fitted_theta": result.report.fitted_theta, "theta": k.theta, "failures": failed })
    );
    match result.failures.into_iter().next() {
        Some((_, e)) => Err(e.into()),
        None => Ok(()),
    }
}

fn cmd_testfn(a: TestfnArgs) -> CliResult {
    let spec = make_spec(&a.problem)?;
    let alpha = spec.alpha;
    let betas = match a.beta {
        Some(b) => b,
        None => {
            let (l, m) = simplest_odd_rational_beta(alpha)?;
            vec![l as f64 / m as f64, optimal_beta(alpha)]
        }
    };
    let mut horizons = a.n_list.clone();
    horizons.sort_by(f64::total_cmp);
    horizons.dedup();
    let mut rows = Vec::new();
    for &beta in &betas {
        let k = bound_constants(alpha, beta).ok();
        for &n in &horizons {
            let m = node_count(n, a.nodes_per_unit)?;
            let row = match k {
                Some(k) => {
                    let path = test_trajectory_y_axis(alpha, n, beta, m)?;
                    let value = action(&spec, &path)?.value;
                    let bound = k.action_threshold(n);
                    output::TestfnRow {
                        beta,
                        n,
                        m,
                        odd_rational: odd_rational(beta).is_some(),
                        valid: true,
                        value,
                        bound,
                        ok: value <= bound * 1.01,
                    }
                }
                None => output::TestfnRow {
                    beta,
                    n,
                    m,
                    odd_rational: odd_rational(beta).is_some(),
                    valid: false,
                    value: f64::NAN,
                    bound: f64::NAN,
                    ok: false,
                },
            };
            rows.push(row);
        }
    }
    std::fs::create_dir_all(&a.out)?;
    output::write_testfn(create(&a.out, "testfn.csv")?, alpha, &rows)?;
    let invalid = rows.iter().filter(|r| !r.valid).count();
    let violations = rows.iter().filter(|r| r.valid && !r.ok).count();
    println!(
        "{}",
        json!({ "schema": SCHEMA, "command": "testfn", "rows": rows.len(), "invalid": invalid, "violations": violations })
    );
    Ok(())
}

fn cmd_verify(a: VerifyArgs) -> CliResult {
    let spec = make_spec(&a.problem)?;
    let k = certificate(spec.alpha, a.beta)?;
    let file = File::open(&a.file).map_err(|e| CliError::input(e.into()))?;
    let traj = OddTrajectory::read_csv(std::io::BufReader::new(file)).map_err(CliError::input)?;
    if !traj.all_feasible(&spec) {
        return Err(CliError::input(Error::Collision {
            point: traj.nodes()[0],
            delta: spec.collision_delta,
        }));
    }
    let diagnostics = diagnose(&spec, &traj, &k, &gradient_components(a.seed, traj.node_count())).map_err(CliError::input)?;
    let record = json!({
        "schema": SCHEMA,
        "command": "verify",
        "params": {
            "alpha": spec.alpha,
            "mu": spec.mu,
            "file": a.file.display().to_string(),
            "beta_certificate": k.beta,
            "seed": a.seed,
        },
        "diagnostics": diagnostics,
    });
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir)?;
        let stem = a
            .file
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "trajectory".into());
        write_json(dir, &format!("verify_{stem}.json"), &record)?;
    }
    println!("{record}");
    Ok(())
}
