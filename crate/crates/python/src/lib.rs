//! Python bindings: problem listing, single solves, experiment sweeps, the
//! convex QP solver and the KKT error metric.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use ssqp::harness::{best_of, run_experiment as sweep, ExperimentConfig};
use ssqp::metrics;
use ssqp::problem::suite::{builtin_suite, find_problem};
use ssqp::problem::{GradientOracle, ProblemKind};
use ssqp::qp::{solve_qp as qp_solve, ConvexQp};
use ssqp::sqp::{run, AlgoParams};

fn matrix(rows: Vec<Vec<f64>>, cols: usize, what: &str) -> PyResult<DMatrix<f64>> {
    if rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err(format!("{what}: every row needs {cols} entries")));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

fn params_from(params_json: Option<&str>) -> PyResult<AlgoParams> {
    match params_json {
        Some(text) => AlgoParams::from_json(text).map_err(|e| PyValueError::new_err(e.to_string())),
        None => Ok(AlgoParams::default()),
    }
}

/// Per-iteration summary and final state of one solve.
#[pyclass(get_all, frozen)]
struct SolveResult {
    problem: String,
    termination: String,
    iterations: usize,
    samples_used: u64,
    x: Vec<f64>,
    tau: f64,
    xi: f64,
    /// 1-based iteration of the best iterate, if any.
    k_best: Option<usize>,
    feas_err_best: f64,
    kkt_err_best: f64,
    feas_err: Vec<f64>,
    kkt_err: Vec<Option<f64>>,
    alpha: Vec<Option<f64>>,
    trace_jsonl: String,
}

#[pymethods]
impl SolveResult {
    fn __repr__(&self) -> String {
        format!(
            "SolveResult(problem={:?}, termination={:?}, iterations={}, feas_err_best={:e}, kkt_err_best={:e})",
            self.problem, self.termination, self.iterations, self.feas_err_best, self.kkt_err_best
        )
    }
}

#[pyfunction]
fn list_problems(py: Python<'_>) -> PyResult<Vec<Bound<'_, PyDict>>> {
    builtin_suite()
        .into_iter()
        .map(|p| {
            let d = PyDict::new(py);
            d.set_item("name", &p.name)?;
            d.set_item("n", p.n)?;
            d.set_item("m", p.m)?;
            d.set_item("regular", p.kind == ProblemKind::Regular)?;
            d.set_item("description", &p.description)?;
            d.set_item("x0", p.x0.as_slice().to_vec())?;
            Ok(d)
        })
        .collect()
}

#[pyfunction]
#[pyo3(signature = (problem, eps_g = 1e-2, seed = 0, budget = 10_000, deterministic = false, max_iterations = None, params_json = None))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &str,
    eps_g: f64,
    seed: u64,
    budget: u64,
    deterministic: bool,
    max_iterations: Option<usize>,
    params_json: Option<&str>,
) -> PyResult<SolveResult> {
    let p = find_problem(problem).ok_or_else(|| PyValueError::new_err(format!("unknown problem `{problem}`")))?;
    let mut params = params_from(params_json)?;
    params.max_gradient_samples = budget;
    params.deterministic = deterministic;
    params.max_iterations = max_iterations.or(params.max_iterations);
    let eps = if deterministic { 0.0 } else { eps_g };
    let mut oracle = GradientOracle::new(eps, seed);
    let out = py.detach(|| run(&p, &mut oracle, &params)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let best = best_of(&p, &out.trajectory, &params);
    let mut trace = Vec::new();
    ssqp::harness::write_trace(&mut trace, &out.trajectory).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(SolveResult {
        problem: p.name.clone(),
        termination: out.termination.as_str().to_string(),
        iterations: out.trajectory.len(),
        samples_used: out.final_state.samples_used,
        x: out.final_state.x.as_slice().to_vec(),
        tau: out.final_state.tau_prev,
        xi: out.final_state.xi_prev,
        k_best: best.map(|(i, _, _)| out.trajectory[i].k),
        feas_err_best: best.map_or(f64::NAN, |b| b.1),
        kkt_err_best: best.map_or(f64::NAN, |b| b.2),
        feas_err: out.trajectory.iter().map(|r| r.feas_err).collect(),
        kkt_err: out.trajectory.iter().map(|r| r.kkt_err()).collect(),
        alpha: out.trajectory.iter().map(|r| r.step.as_ref().map(|s| s.alpha)).collect(),
        trace_jsonl: String::from_utf8(trace).expect("JSON is UTF-8"),
    })
}

/// Runs the problem x noise level x seed sweep and returns one dict per run.
#[pyfunction]
#[pyo3(signature = (problems = None, noise_levels = None, seeds = 5, seed_base = 0, budget = 10_000, deterministic = false, jobs = 0, params_json = None))]
#[allow(clippy::too_many_arguments)]
fn run_experiment<'py>(
    py: Python<'py>,
    problems: Option<Vec<String>>,
    noise_levels: Option<Vec<f64>>,
    seeds: usize,
    seed_base: u64,
    budget: u64,
    deterministic: bool,
    jobs: usize,
    params_json: Option<&str>,
) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let defaults = ExperimentConfig::default();
    let config = ExperimentConfig {
        problems: problems.unwrap_or(defaults.problems),
        noise_levels: noise_levels.unwrap_or(defaults.noise_levels),
        seeds,
        seed_base,
        params: params_from(params_json)?,
        budget,
        deterministic,
        jobs,
        record_wall_time: false,
        trace: None,
    };
    let results = py.detach(|| sweep(&config)).map_err(|e| PyValueError::new_err(e.to_string()))?;
    results
        .into_iter()
        .map(|r| {
            let d = PyDict::new(py);
            d.set_item("problem", r.problem)?;
            d.set_item("seed", r.seed)?;
            d.set_item("eps_g", r.eps_g)?;
            d.set_item("k_best", r.k_best)?;
            d.set_item("feas_err_best", r.feas_err_best)?;
            d.set_item("kkt_err_best", r.kkt_err_best)?;
            d.set_item("iterations", r.iterations)?;
            d.set_item("samples_used", r.samples_used)?;
            d.set_item("terminated_by", r.terminated_by)?;
            Ok(d)
        })
        .collect()
}

/// Solves `min 0.5 z'Qz + q'z  s.t.  A_eq z = b_eq, A_in z >= b_in`.
#[pyfunction]
#[pyo3(signature = (q_mat, q, a_eq, b_eq, a_in, b_in, tol = 1e-9, max_iter = None))]
#[allow(clippy::too_many_arguments)]
fn solve_qp<'py>(
    py: Python<'py>,
    q_mat: Vec<Vec<f64>>,
    q: Vec<f64>,
    a_eq: Vec<Vec<f64>>,
    b_eq: Vec<f64>,
    a_in: Vec<Vec<f64>>,
    b_in: Vec<f64>,
    tol: f64,
    max_iter: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let p = q.len();
    let qp = ConvexQp::new(
        matrix(q_mat, p, "q_mat")?,
        DVector::from_vec(q),
        matrix(a_eq, p, "a_eq")?,
        DVector::from_vec(b_eq),
        matrix(a_in, p, "a_in")?,
        DVector::from_vec(b_in),
    )
    .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let sol = qp_solve(&qp, tol, max_iter.unwrap_or(50 * (qp.dim() + qp.n_in()).max(1)));
    let d = PyDict::new(py);
    d.set_item("status", format!("{:?}", sol.status))?;
    d.set_item("z", sol.z.as_slice().to_vec())?;
    d.set_item("y_eq", sol.y_eq.as_slice().to_vec())?;
    d.set_item("z_in", sol.z_in.as_slice().to_vec())?;
    d.set_item("iterations", sol.iterations)?;
    d.set_item("kkt_residual", sol.kkt_residual)?;
    Ok(d)
}

/// Infinity-norm violation of the first-order conditions.
#[pyfunction]
fn kkt_err(
    x: Vec<f64>,
    grad_f: Vec<f64>,
    c: Vec<f64>,
    jacobian: Vec<Vec<f64>>,
    y: Vec<f64>,
    z: Vec<f64>,
) -> PyResult<f64> {
    let n = x.len();
    if grad_f.len() != n || z.len() != n || jacobian.len() != c.len() || y.len() != c.len() {
        return Err(PyValueError::new_err("inconsistent dimensions"));
    }
    let j = matrix(jacobian, n, "jacobian")?;
    Ok(metrics::kkt_err(
        &DVector::from_vec(x),
        &DVector::from_vec(grad_f),
        &DVector::from_vec(c),
        &j,
        &DVector::from_vec(y),
        &DVector::from_vec(z),
    ))
}

#[pymodule]
fn pyssqp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<SolveResult>()?;
    m.add_function(wrap_pyfunction!(list_problems, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(solve_qp, m)?)?;
    m.add_function(wrap_pyfunction!(kkt_err, m)?)?;
    Ok(())
}
