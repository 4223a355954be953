use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{
    best_of, noise_monotonicity, read_trace, run_experiment, summarize, write_results, write_summary, write_trace, CheckReport,
    ExperimentConfig, HarnessError, DEFAULT_BUDGET, DEFAULT_NOISE_LEVELS, DEFAULT_SEEDS,
};
use crate::problem::suite::{builtin_suite, find_problem};
use crate::problem::{GradientOracle, ProblemKind};
use crate::sqp::{run, AlgoParams, StepPolicy};

const EXIT_OK: i32 = 0;
const EXIT_USAGE: i32 = 1;
const EXIT_CELL_FAILURES: i32 = 2;
const EXIT_VIOLATIONS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "ssqp", version, about = "Stochastic SQP solver and benchmark harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep problems x noise levels x seeds and write one CSV row per run
    Run(RunArgs),
    /// Solve one problem with one seed and write the per-iteration trace
    Solve(SolveArgs),
    /// Replay the per-iteration invariants over a JSON Lines trace
    Check(CheckArgs),
    /// List the built-in problems
    List,
}

#[derive(Debug, Args)]
struct AlgoArgs {
    /// Stochastic gradient samples per run
    #[arg(long, default_value_t = DEFAULT_BUDGET)]
    budget: u64,
    /// Use exact gradients (noise levels collapse to 0)
    #[arg(long)]
    deterministic: bool,
    /// JSON object of algorithm parameter overrides
    #[arg(long)]
    params: Option<PathBuf>,
    /// Step-size choice within [alpha_min, alpha_max]
    #[arg(long, value_parser = clap::value_parser!(StepPolicy))]
    step_policy: Option<StepPolicy>,
}

impl clap::ValueEnum for StepPolicy {
    fn value_variants<'a>() -> &'a [Self] {
        &[StepPolicy::Grid, StepPolicy::Max, StepPolicy::Min]
    }

    fn to_possible_value(&self) -> Option<clap::builder::PossibleValue> {
        Some(clap::builder::PossibleValue::new(match self {
            StepPolicy::Grid => "grid",
            StepPolicy::Max => "max",
            StepPolicy::Min => "min",
        }))
    }
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Comma-separated problem names, or `all`
    #[arg(long, value_delimiter = ',', default_value = "all")]
    problems: Vec<String>,
    /// Comma-separated gradient noise levels
    #[arg(long = "eps-g", value_delimiter = ',')]
    eps_g: Option<Vec<f64>>,
    /// Seeds per (problem, noise level)
    #[arg(long, default_value_t = DEFAULT_SEEDS)]
    seeds: usize,
    /// First seed (default: $SSQP_SEED, else 0)
    #[arg(long)]
    seed_base: Option<u64>,
    /// Worker threads (0: one per core)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Results CSV (default: standard output)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Quartile summary CSV
    #[arg(long)]
    summary: Option<PathBuf>,
    /// JSON Lines file receiving every trajectory
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Record wall time per run (makes the CSV non-reproducible)
    #[arg(long)]
    wall_time: bool,
    #[command(flatten)]
    algo: AlgoArgs,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    problem: String,
    /// Gradient noise level
    #[arg(long = "eps-g", default_value_t = 1e-2)]
    eps_g: f64,
    /// Oracle seed (default: $SSQP_SEED, else 0)
    #[arg(long)]
    seed: Option<u64>,
    /// Trace destination (default: standard output)
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[command(flatten)]
    algo: AlgoArgs,
}

#[derive(Debug, Args)]
struct CheckArgs {
    /// JSON Lines trace written by `run` or `solve`
    #[arg(long)]
    trace: PathBuf,
    /// Violations to print
    #[arg(long, default_value_t = 20)]
    show: usize,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("{0}")]
    Usage(String),
}

fn default_seed() -> Result<u64, CliError> {
    match std::env::var("SSQP_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| CliError::Usage(format!("SSQP_SEED=`{v}` is not an unsigned integer"))),
        Err(_) => Ok(0),
    }
}

fn load_params(algo: &AlgoArgs) -> Result<AlgoParams, CliError> {
    let mut params = match &algo.params {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| HarnessError::Io { path: path.clone(), source })?;
            AlgoParams::from_json(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => AlgoParams::default(),
    };
    if let Some(policy) = algo.step_policy {
        params.step_policy = policy;
    }
    params.max_gradient_samples = algo.budget;
    params.deterministic = algo.deterministic;
    Ok(params)
}

fn output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| HarnessError::Io { path: p.clone(), source })?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_list() -> Result<i32, CliError> {
    for p in builtin_suite() {
        let kind = match p.kind {
            ProblemKind::Regular => "regular",
            ProblemKind::InfeasibleStationary => "infeasible-stationary",
        };
        println!("{:<20} n={:<3} m={:<3} {:<22} {}", p.name, p.n, p.m, kind, p.description);
    }
    Ok(EXIT_OK)
}

fn cmd_run(args: RunArgs) -> Result<i32, CliError> {
    let params = load_params(&args.algo)?;
    let problems = if args.problems.iter().any(|p| p == "all") {
        builtin_suite().into_iter().map(|p| p.name).collect()
    } else {
        args.problems
    };
    let config = ExperimentConfig {
        problems,
        noise_levels: args.eps_g.unwrap_or_else(|| DEFAULT_NOISE_LEVELS.to_vec()),
        seeds: args.seeds,
        seed_base: match args.seed_base {
            Some(s) => s,
            None => default_seed()?,
        },
        budget: args.algo.budget,
        deterministic: args.algo.deterministic,
        params,
        jobs: args.jobs,
        record_wall_time: args.wall_time,
        trace: args.trace,
    };
    let results = run_experiment(&config).map_err(|e| match e {
        HarnessError::Config(_) | HarnessError::UnknownProblem(_) => CliError::Usage(e.to_string()),
        other => other.into(),
    })?;
    write_results(output(&args.out)?, &results)?;
    let rows = summarize(&results);
    if let Some(path) = &args.summary {
        write_summary(output(&Some(path.clone()))?, &rows)?;
    }
    let mono = noise_monotonicity(&rows, 1);
    eprintln!(
        "{} runs, {} failed; median best KKT error nondecreasing in eps_g: {} ({} inversions over {} groups)",
        results.len(),
        results.iter().filter(|r| r.failed()).count(),
        if mono.holds { "yes" } else { "no" },
        mono.inversions.len(),
        mono.groups
    );
    for r in results.iter().filter(|r| r.failed()) {
        eprintln!("failed: {} eps_g={} seed={}: {}", r.problem, r.eps_g, r.seed, r.terminated_by);
    }
    Ok(if results.iter().any(|r| r.failed()) { EXIT_CELL_FAILURES } else { EXIT_OK })
}

fn cmd_solve(args: SolveArgs) -> Result<i32, CliError> {
    let mut params = load_params(&args.algo)?;
    params.max_iterations = args.max_iterations.or(params.max_iterations);
    let problem = find_problem(&args.problem).ok_or_else(|| CliError::Usage(format!("unknown problem `{}`", args.problem)))?;
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    let eps_g = if params.deterministic { 0.0 } else { args.eps_g };
    if !(eps_g.is_finite() && eps_g >= 0.0) {
        return Err(CliError::Usage(format!("noise level {eps_g} is not a nonnegative number")));
    }
    let mut oracle = GradientOracle::new(eps_g, seed);
    let out = match run(&problem, &mut oracle, &params) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return Ok(EXIT_CELL_FAILURES);
        }
    };
    let trace_path = args.trace.clone();
    write_trace(output(&args.trace)?, &out.trajectory)
        .map_err(|source| HarnessError::Io { path: trace_path.unwrap_or_else(|| "<stdout>".into()), source })?;
    eprintln!("problem {} eps_g {} seed {}: {}", problem.name, eps_g, seed, out.termination.as_str());
    eprintln!("iterations {} samples {} final tau {:e}", out.trajectory.len(), out.final_state.samples_used, out.final_state.tau_prev);
    if let Some((i, feas, kkt)) = best_of(&problem, &out.trajectory, &params) {
        eprintln!("best iterate k={} feas_err {feas:e} kkt_err {kkt:e}", out.trajectory[i].k);
    }
    Ok(EXIT_OK)
}

fn cmd_check(args: CheckArgs) -> Result<i32, CliError> {
    let records = read_trace(&args.trace)?;
    let report = CheckReport::from_records(&records);
    for v in report.violations.iter().take(args.show) {
        println!("violation k={} {}: {}", v.k, v.invariant, v.detail);
    }
    println!(
        "{} trajectories, {} iterations, {} violations",
        report.trajectories,
        report.iterations,
        report.violations.len()
    );
    Ok(if report.passed() { EXIT_OK } else { EXIT_VIOLATIONS })
}

/// Entry point of the `ssqp` binary. `argv` includes the program name.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Check(a) => cmd_check(a),
        Command::List => cmd_list(),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_USAGE
        }
    }
}
