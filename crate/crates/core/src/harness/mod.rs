//! Benchmark sweeps over problems, noise levels and seeds.

mod check;
mod cli;
mod summary;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use check::{check_trajectory, split_trajectories, CheckReport, Violation};
pub use cli::cli_main;
pub use summary::{noise_monotonicity, quartiles, summarize, write_summary, MonotonicityReport, Quartiles, SummaryRow};

use crate::metrics::{best_iterate, kkt_err, true_direction, DEFAULT_FEAS_THRESHOLD};
use crate::problem::suite::{builtin_suite, find_problem};
use crate::problem::{GradientOracle, NlpProblem};
use crate::sqp::{run, AlgoParams, IterationRecord, RunOutput};

pub const DEFAULT_NOISE_LEVELS: [f64; 4] = [1e-8, 1e-4, 1e-2, 1e-1];
pub const DEFAULT_SEEDS: usize = 5;
pub const DEFAULT_BUDGET: u64 = 10_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("unknown problem `{0}`")]
    UnknownProblem(String),
    #[error("invalid experiment configuration: {0}")]
    Config(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Trace {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    /// Problem names in output order.
    pub problems: Vec<String>,
    pub noise_levels: Vec<f64>,
    pub seeds: usize,
    /// Seeds are `seed_base, seed_base + 1, ...`.
    pub seed_base: u64,
    pub params: AlgoParams,
    pub budget: u64,
    pub deterministic: bool,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    /// Measure wall time per cell. Off by default so reruns give identical CSVs.
    pub record_wall_time: bool,
    /// JSON Lines file receiving every trajectory in cell order.
    pub trace: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problems: builtin_suite().into_iter().map(|p| p.name).collect(),
            noise_levels: DEFAULT_NOISE_LEVELS.to_vec(),
            seeds: DEFAULT_SEEDS,
            seed_base: 0,
            params: AlgoParams::default(),
            budget: DEFAULT_BUDGET,
            deterministic: false,
            jobs: 0,
            record_wall_time: false,
            trace: None,
        }
    }
}

/// One `(problem, noise level, seed)` combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub problem: String,
    pub eps_g: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.problems.is_empty() {
            return Err(HarnessError::Config("empty problem list".into()));
        }
        if self.seeds == 0 {
            return Err(HarnessError::Config("at least one seed is required".into()));
        }
        if !self.deterministic && self.noise_levels.is_empty() {
            return Err(HarnessError::Config("empty noise-level list".into()));
        }
        if let Some(bad) = self.noise_levels.iter().find(|e| !(e.is_finite() && **e >= 0.0)) {
            return Err(HarnessError::Config(format!("noise level {bad} is not a nonnegative number")));
        }
        for name in &self.problems {
            if find_problem(name).is_none() {
                return Err(HarnessError::UnknownProblem(name.clone()));
            }
        }
        self.params.validate().map_err(|e| HarnessError::Config(e.to_string()))
    }

    /// Noise levels actually run: `{0}` in deterministic mode.
    pub fn effective_noise_levels(&self) -> Vec<f64> {
        if self.deterministic {
            vec![0.0]
        } else {
            self.noise_levels.clone()
        }
    }

    /// Cells ordered by problem, then noise level, then seed.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for problem in &self.problems {
            for eps_g in self.effective_noise_levels() {
                for s in 0..self.seeds as u64 {
                    cells.push(Cell { problem: problem.clone(), eps_g, seed: self.seed_base + s });
                }
            }
        }
        cells
    }

    /// Parameters for one run: the budget and mode of the sweep, with
    /// true-direction logging on since the best iterate needs it.
    pub fn run_params(&self) -> AlgoParams {
        AlgoParams {
            max_gradient_samples: self.budget,
            deterministic: self.deterministic,
            compute_true_direction: true,
            ..self.params.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub problem: String,
    pub seed: u64,
    pub eps_g: f64,
    /// 1-based iteration of the best iterate; empty when no iteration ran.
    pub k_best: Option<usize>,
    pub feas_err_best: f64,
    pub kkt_err_best: f64,
    pub iterations: usize,
    pub samples_used: u64,
    pub terminated_by: String,
    #[serde(rename = "wall_time_s")]
    pub wall_time: f64,
}

impl RunResult {
    pub fn failed(&self) -> bool {
        self.terminated_by.starts_with("error")
    }
}

/// KKT error of a record with the true-gradient multipliers. Records that
/// stopped before the tangential step get the multipliers of the
/// true-gradient subproblem solved here.
pub fn record_kkt_err(problem: &NlpProblem, record: &IterationRecord, params: &AlgoParams) -> f64 {
    if let Some(e) = record.kkt_err() {
        return e;
    }
    let x = DVector::from_column_slice(&record.x);
    let v = DVector::from_column_slice(&record.v);
    let c = DVector::from_column_slice(&record.c);
    let j = problem.jacobian(&x);
    let h = DMatrix::identity(problem.n, problem.n) * params.h_scale;
    match true_direction(&x, problem, &h, &j, &v, params.qp_tol) {
        Ok(t) => kkt_err(&x, &problem.gradient(&x), &c, &j, &t.y, &t.z),
        Err(_) => f64::INFINITY,
    }
}

/// Best iterate of a trajectory as `(record index, feas_err, kkt_err)`.
pub fn best_of(problem: &NlpProblem, trajectory: &[IterationRecord], params: &AlgoParams) -> Option<(usize, f64, f64)> {
    if trajectory.is_empty() {
        return None;
    }
    let feas: Vec<f64> = trajectory.iter().map(|r| r.feas_err).collect();
    let kkt: Vec<Option<f64>> = trajectory
        .iter()
        .map(|r| if r.feas_err <= DEFAULT_FEAS_THRESHOLD { Some(record_kkt_err(problem, r, params)) } else { r.kkt_err() })
        .collect();
    let i = best_iterate(&feas, &kkt, DEFAULT_FEAS_THRESHOLD).ok()?;
    let kkt_best = kkt[i].unwrap_or_else(|| record_kkt_err(problem, &trajectory[i], params));
    Some((i, feas[i], kkt_best))
}

/// Runs one cell. The trajectory is returned alongside the result unless the
/// run failed.
pub fn run_cell(config: &ExperimentConfig, cell: &Cell) -> (RunResult, Option<RunOutput>) {
    let started = Instant::now();
    let params = config.run_params();
    let mut result = RunResult {
        problem: cell.problem.clone(),
        seed: cell.seed,
        eps_g: cell.eps_g,
        k_best: None,
        feas_err_best: f64::NAN,
        kkt_err_best: f64::NAN,
        iterations: 0,
        samples_used: 0,
        terminated_by: String::new(),
        wall_time: 0.0,
    };
    let Some(problem) = find_problem(&cell.problem) else {
        result.terminated_by = format!("error: unknown problem `{}`", cell.problem);
        return (result, None);
    };
    let mut oracle = GradientOracle::new(cell.eps_g, cell.seed);
    let output = match run(&problem, &mut oracle, &params) {
        Ok(out) => out,
        Err(e) => {
            result.terminated_by = format!("error: {e}");
            return (result, None);
        }
    };
    result.iterations = output.trajectory.len();
    result.samples_used = output.final_state.samples_used;
    result.terminated_by = output.termination.as_str().to_string();
    if let Some((i, feas, kkt)) = best_of(&problem, &output.trajectory, &params) {
        result.k_best = Some(output.trajectory[i].k);
        result.feas_err_best = feas;
        result.kkt_err_best = kkt;
    }
    if config.record_wall_time {
        result.wall_time = started.elapsed().as_secs_f64();
    }
    (result, Some(output))
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool construction")
}

fn part_path(trace: &Path, index: usize) -> PathBuf {
    let mut name = trace.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(format!(".part{index:06}"));
    trace.with_file_name(name)
}

/// Runs every cell, in parallel when `jobs != 1`. Results come back in cell
/// order. Cell failures are recorded in `terminated_by`; only trace I/O
/// errors abort the sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<RunResult>, HarnessError> {
    config.validate()?;
    let cells = config.cells();
    let work = |(index, cell): (usize, &Cell)| -> Result<RunResult, HarnessError> {
        let (result, output) = run_cell(config, cell);
        if let (Some(trace), Some(out)) = (&config.trace, output) {
            let path = part_path(trace, index);
            let file = File::create(&path).map_err(io_err(&path))?;
            write_trace(BufWriter::new(file), &out.trajectory).map_err(io_err(&path))?;
        }
        Ok(result)
    };
    let results: Vec<Result<RunResult, HarnessError>> =
        pool(config.jobs).install(|| cells.par_iter().enumerate().map(work).collect());
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    if let Some(trace) = &config.trace {
        let file = File::create(trace).map_err(io_err(trace))?;
        let mut out = BufWriter::new(file);
        for index in 0..cells.len() {
            let path = part_path(trace, index);
            if let Ok(mut part) = File::open(&path) {
                io::copy(&mut part, &mut out).map_err(io_err(trace))?;
                std::fs::remove_file(&path).map_err(io_err(&path))?;
            }
        }
        out.flush().map_err(io_err(trace))?;
    }
    Ok(results)
}

pub const CSV_HEADER: &str = "problem,seed,eps_g,k_best,feas_err_best,kkt_err_best,iterations,samples_used,terminated_by,wall_time_s";

pub fn write_results<W: Write>(out: W, results: &[RunResult]) -> Result<(), HarnessError> {
    let mut writer = csv::Writer::from_writer(out);
    for r in results {
        writer.serialize(r)?;
    }
    if results.is_empty() {
        writer.write_record(CSV_HEADER.split(','))?;
    }
    writer.flush().map_err(|source| HarnessError::Io { path: PathBuf::from("<csv>"), source })?;
    Ok(())
}

pub fn write_trace<W: Write>(mut out: W, trajectory: &[IterationRecord]) -> io::Result<()> {
    for record in trajectory {
        serde_json::to_writer(&mut out, record)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn read_trace(path: &Path) -> Result<Vec<IterationRecord>, HarnessError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|source| HarnessError::Trace { path: path.to_path_buf(), line: i + 1, source })?;
        records.push(record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(problems: &[&str], seeds: usize) -> ExperimentConfig {
        ExperimentConfig {
            problems: problems.iter().map(|s| s.to_string()).collect(),
            noise_levels: vec![1e-2],
            seeds,
            budget: 200,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn one_result_per_cell() {
        let results = run_experiment(&small(&["eq_qp_4", "hs6"], 3)).unwrap();
        assert_eq!(results.len(), 6);
        assert_eq!(results[0].problem, "eq_qp_4");
        assert_eq!(results[5].problem, "hs6");
        assert_eq!(results.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn deterministic_collapses_noise_levels() {
        let mut cfg = small(&["eq_qp_4"], 1);
        cfg.noise_levels = DEFAULT_NOISE_LEVELS.to_vec();
        cfg.deterministic = true;
        assert_eq!(cfg.cells(), vec![Cell { problem: "eq_qp_4".into(), eps_g: 0.0, seed: 0 }]);
    }

    #[test]
    fn rerun_gives_identical_csv() {
        let mut cfg = small(&["eq_qp_4", "circle_linear"], 2);
        cfg.jobs = 3;
        let mut a = Vec::new();
        write_results(&mut a, &run_experiment(&cfg).unwrap()).unwrap();
        cfg.jobs = 1;
        let mut b = Vec::new();
        write_results(&mut b, &run_experiment(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let text = String::from_utf8(a).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(matches!(small(&[], 1).validate(), Err(HarnessError::Config(_))));
        assert!(matches!(small(&["eq_qp_4"], 0).validate(), Err(HarnessError::Config(_))));
        assert!(matches!(small(&["nope"], 1).validate(), Err(HarnessError::UnknownProblem(_))));
    }

    #[test]
    fn empty_trajectory_reports_no_best_iterate() {
        let mut cfg = small(&["eq_qp_4"], 1);
        cfg.budget = 5;
        let results = run_experiment(&cfg).unwrap();
        assert_eq!(results[0].k_best, None);
        assert!(results[0].kkt_err_best.is_nan());
        assert_eq!(results[0].terminated_by, "budget_exhausted");
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(&["eq_qp_4", "inf_stat_1d"], 2);
        cfg.trace = Some(dir.path().join("t.jsonl"));
        let results = run_experiment(&cfg).unwrap();
        let records = read_trace(&dir.path().join("t.jsonl")).unwrap();
        assert_eq!(records.len(), results.iter().map(|r| r.iterations).sum::<usize>());
        assert_eq!(split_trajectories(&records).len(), 4);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
        // replay gives bitwise-identical records
        let (_, out) = run_cell(&cfg, &cfg.cells()[0]);
        assert_eq!(&records[..results[0].iterations], &out.unwrap().trajectory[..]);
    }
}
