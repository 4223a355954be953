//! The stochastic SQP iteration and its outer loop.

mod lipschitz;
mod params;
mod record;
mod stepsize;
mod update;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lipschitz::{estimate_lipschitz, LipschitzEstimate};
pub use params::{AlgoParams, BetaSchedule, LipschitzMode, ParamsError, ParamsFileError, StepPolicy};
pub use record::{IterationRecord, IterationStatus, StepRecord, TrueDirectionRecord};
pub use stepsize::{alpha_min, eval_varphi, select_step_size, StepSizeError, Varphi};
pub use update::{update_merit_parameter, update_ratio_parameter};

use crate::linalg::{linearized_gain, norm_inf};
use crate::metrics::{kkt_err, stationarity_measure};
use crate::problem::{eval_point, EvaluationError, GradientOracle, NlpProblem};
use crate::step::{is_infeasible_stationary, model_reduction, normal_step, tangential_step, StepError};

/// Bound violations of `x + alpha d` up to this size are clipped to zero.
const CLIP_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SqpError {
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error(transparent)]
    Step(#[from] StepError),
    #[error("iteration {k}: {source}")]
    StepSize {
        k: usize,
        #[source]
        source: StepSizeError,
    },
    #[error("problem `{0}` declares no Lipschitz constants")]
    MissingLipschitz(String),
    #[error("iteration {k}: x + alpha d has entry {value:e} below zero")]
    BoundViolation { k: usize, value: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SqpState {
    /// Index of the next iteration (1-based).
    pub k: usize,
    pub x: DVector<f64>,
    pub tau_prev: f64,
    pub xi_prev: f64,
    pub samples_used: u64,
    pub lipschitz_l: f64,
    pub lipschitz_gamma: f64,
    /// Numerator of the step-size schedule since the last restart.
    pub beta_base: f64,
    /// Iteration of the last schedule restart.
    pub k_hat: usize,
    estimates: u64,
}

impl SqpState {
    /// Initial state at the problem's start point projected onto `x >= 0`.
    pub fn new(problem: &NlpProblem, params: &AlgoParams) -> Result<Self, SqpError> {
        let (l, gamma) = match params.lipschitz_mode {
            LipschitzMode::Analytic => {
                let lc = problem.lipschitz.ok_or_else(|| SqpError::MissingLipschitz(problem.name.clone()))?;
                (lc.l, lc.gamma)
            }
            LipschitzMode::Fixed => (params.lipschitz_l, params.lipschitz_gamma),
            LipschitzMode::Estimate => (params.lipschitz_l, params.lipschitz_gamma),
        };
        Ok(SqpState {
            k: 1,
            x: problem.x0.map(|v| v.max(0.0)),
            tau_prev: params.tau0,
            xi_prev: params.xi0,
            samples_used: 0,
            lipschitz_l: l,
            lipschitz_gamma: gamma,
            beta_base: params.beta,
            k_hat: 1,
            estimates: 0,
        })
    }

    pub fn beta(&self, params: &AlgoParams) -> f64 {
        match params.beta_schedule {
            BetaSchedule::Constant => self.beta_base,
            BetaSchedule::Diminishing => self.beta_base / (self.k + 1 - self.k_hat) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationOutcome {
    Step,
    InfeasibleStationary,
    BudgetExhausted,
    /// Early-stop tolerance met at the iterate of the recorded iteration.
    Converged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    InfeasibleStationary,
    BudgetExhausted,
    Converged,
    IterationLimit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::InfeasibleStationary => "infeasible_stationary",
            Termination::BudgetExhausted => "budget_exhausted",
            Termination::Converged => "converged",
            Termination::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trajectory: Vec<IterationRecord>,
    pub termination: Termination,
    pub final_state: SqpState,
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.as_slice().to_vec()
}

fn finite_or_none(v: f64) -> Option<f64> {
    if v.is_finite() {
        Some(v)
    } else {
        None
    }
}

fn refresh_lipschitz(state: &mut SqpState, problem: &NlpProblem, oracle: &mut GradientOracle, params: &AlgoParams) {
    let radius = params.estimate_radius * norm_inf(&state.x).max(1.0);
    let stream = state.estimates;
    state.estimates += 1;
    let est = if params.deterministic {
        let mut exact = GradientOracle::new(0.0, oracle.seed());
        estimate_lipschitz(problem, &mut exact, &state.x, radius, params.estimate_samples, params.lipschitz_floor, stream)
    } else {
        estimate_lipschitz(problem, oracle, &state.x, radius, params.estimate_samples, params.lipschitz_floor, stream)
    };
    state.lipschitz_l = est.l;
    state.lipschitz_gamma = est.gamma;
    if params.count_estimation_samples {
        state.samples_used += est.samples;
    }
}

/// One iteration from `state`. Returns the record (absent when the budget is
/// exhausted before the iteration starts) and the outcome.
pub fn sqp_iteration(
    state: &mut SqpState,
    problem: &NlpProblem,
    oracle: &mut GradientOracle,
    params: &AlgoParams,
) -> Result<(Option<IterationRecord>, IterationOutcome), SqpError> {
    let budget = params.max_gradient_samples;
    if state.samples_used >= budget {
        return Ok((None, IterationOutcome::BudgetExhausted));
    }
    let k = state.k;
    if params.lipschitz_mode == LipschitzMode::Estimate && (k - 1).is_multiple_of(params.estimate_every) {
        refresh_lipschitz(state, problem, oracle, params);
        if state.samples_used >= budget {
            return Ok((None, IterationOutcome::BudgetExhausted));
        }
    }

    let x = state.x.clone();
    let ev = eval_point(problem, &x)?;
    let (c, jac) = (ev.c, ev.jac);
    let mu = (params.mu_factor * c.norm_squared()).max(params.mu_floor);
    let normal = normal_step(&x, &c, &jac, mu, params.qp_tol)?;
    let jv = &jac * &normal.v;
    let mut record = IterationRecord {
        k,
        status: IterationStatus::Step,
        x: to_vec(&x),
        c: to_vec(&c),
        jv: to_vec(&jv),
        v: to_vec(&normal.v),
        mu,
        normal_gain: normal.lin_feas_gain,
        feas_err: norm_inf(&c),
        samples_used: state.samples_used,
        rank_deficient: normal.rank_deficient,
        step: None,
    };
    if is_infeasible_stationary(&c, &normal.v, params.feas_tol, params.step_tol) {
        record.status = IterationStatus::InfeasibleStationary;
        return Ok((Some(record), IterationOutcome::InfeasibleStationary));
    }

    let beta = state.beta(params);
    if params.anneal_noise {
        oracle.set_noise_multiplier((beta / params.beta).powi(2));
    }
    let grad_f = problem.gradient(&x);
    let g = if params.deterministic { grad_f.clone() } else { oracle.sample(problem, &x) };
    state.samples_used += 1;
    record.samples_used = state.samples_used;

    let h = DMatrix::identity(problem.n, problem.n) * params.h_scale;
    let tan = tangential_step(&x, &g, &h, &jac, &normal.v, params.qp_tol)?;
    let d = tan.d.clone();
    let jd = &jac * &d;
    let lin_gain = linearized_gain(&c, &jd);
    let d_norm_sq = d.norm_squared();
    let zero_step = norm_inf(&d) <= params.zero_step_tol * norm_inf(&x).max(1.0);
    let (l, gamma) = (state.lipschitz_l, state.lipschitz_gamma);

    let (tau_prev, xi_prev) = (state.tau_prev, state.xi_prev);
    let (tau_trial, tau, xi_trial, xi, delta_l);
    let (a_min, clamped, a_phi, a_max, raised, alpha);
    if zero_step {
        tau_trial = f64::INFINITY;
        tau = tau_prev;
        xi_trial = f64::INFINITY;
        xi = xi_prev;
        delta_l = model_reduction(tau, &g, &d, &c, &jac);
        (a_min, clamped, a_phi, a_max, raised, alpha) = (1.0, false, 1.0, 1.0, false, 1.0);
    } else {
        (tau_trial, tau) = update_merit_parameter(tau_prev, &d, tan.quad_value, lin_gain, params.sigma, params.eps_tau);
        delta_l = -tau * g.dot(&d) + lin_gain;
        (xi_trial, xi) = update_ratio_parameter(xi_prev, delta_l, tau, d_norm_sq, params.eps_xi);
        (a_min, clamped) = alpha_min(beta, xi, tau, l, gamma, params.eta);
        let varphi = Varphi { beta, delta_l, c: c.clone(), jd: jd.clone(), tau, l, gamma, d_norm_sq, eta: params.eta };
        a_phi = varphi.alpha_phi().map_err(|source| SqpError::StepSize { k, source })?;
        let upper = 1.0_f64.min(a_phi).min(a_min + params.theta * beta);
        raised = upper < a_min;
        a_max = upper.max(a_min);
        let policy = if problem.m == 0 { StepPolicy::Max } else { params.step_policy };
        alpha = select_step_size(a_min, a_max, policy, params.grid_base, params.theta * beta, |a| varphi.eval(a));
    }

    let mut x_next = &x + alpha * &d;
    let lowest = x_next.iter().cloned().fold(f64::INFINITY, f64::min);
    if lowest < -CLIP_TOL * norm_inf(&x).max(1.0) {
        return Err(SqpError::BoundViolation { k, value: lowest });
    }
    x_next.iter_mut().for_each(|v| *v = v.max(0.0));

    let merit = tau * ev.f + c.norm();
    let merit_next = problem.merit(&x_next, tau);

    let truth = if params.compute_true_direction {
        let (d_true, y_true, z_true) = if params.deterministic {
            (d.clone(), tan.y.clone(), tan.z.clone())
        } else {
            let t = tangential_step(&x, &grad_f, &h, &jac, &normal.v, params.qp_tol)?;
            (t.d, t.y, t.z)
        };
        let gain_true = linearized_gain(&c, &(&jac * &d_true));
        let quad_true = grad_f.dot(&d_true) + 0.5 * d_true.dot(&(&h * &d_true));
        let tau_true_trial = if quad_true <= 0.0 || gain_true <= 0.0 {
            None
        } else {
            Some((1.0 - params.sigma) * gain_true / quad_true)
        };
        Some(TrueDirectionRecord {
            delta_l_true: -tau * grad_f.dot(&d_true) + gain_true,
            grad_dot_diff: grad_f.dot(&(&d - &d_true)),
            tau_true_trial,
            kkt_err: kkt_err(&x, &grad_f, &c, &jac, &y_true, &z_true),
            stationarity: stationarity_measure(tau, params.zeta, params.sigma, &d_true, &c, &jac),
            d_true: to_vec(&d_true),
            y_true: to_vec(&y_true),
            z_true: to_vec(&z_true),
        })
    } else {
        None
    };

    if params.beta_restart && (tau < tau_prev || xi < xi_prev) {
        let a_prime = 2.0 * (1.0 - params.eta) * xi * tau / (tau * l + gamma);
        state.beta_base = (params.psi * a_prime / (2.0 * (1.0 - params.eta) * (a_prime + params.theta))).min(1.0);
        state.k_hat = k + 1;
    }

    let converged = match (params.early_stop, &truth) {
        (Some(tol), Some(t)) => record.feas_err <= tol && t.kkt_err <= tol,
        _ => false,
    };
    record.step = Some(StepRecord {
        g: to_vec(&g),
        grad_f: to_vec(&grad_f),
        d: to_vec(&d),
        jd: to_vec(&jd),
        y: to_vec(&tan.y),
        z: to_vec(&tan.z),
        quad_value: tan.quad_value,
        zero_step,
        tau_prev,
        tau_trial: finite_or_none(tau_trial),
        tau,
        xi_prev,
        xi_trial: finite_or_none(xi_trial),
        xi,
        beta,
        lipschitz_l: l,
        lipschitz_gamma: gamma,
        lipschitz_exact: params.lipschitz_mode == LipschitzMode::Analytic,
        alpha_min: a_min,
        alpha_min_clamped: clamped,
        alpha_phi: a_phi,
        alpha_max: a_max,
        alpha_max_raised: raised,
        alpha,
        delta_l,
        lin_gain,
        d_norm_sq,
        merit,
        merit_next,
        x_next: to_vec(&x_next),
        truth,
        sigma: params.sigma,
        eta: params.eta,
        eps_tau: params.eps_tau,
        eps_xi: params.eps_xi,
        zeta: params.zeta,
        theta: params.theta,
    });

    state.x = x_next;
    state.tau_prev = tau;
    state.xi_prev = xi;
    state.k += 1;
    let outcome = if converged { IterationOutcome::Converged } else { IterationOutcome::Step };
    Ok((Some(record), outcome))
}

/// Iterates until infeasible stationarity, budget exhaustion, the early-stop
/// tolerance or `max_iterations`.
pub fn run(problem: &NlpProblem, oracle: &mut GradientOracle, params: &AlgoParams) -> Result<RunOutput, SqpError> {
    params.validate()?;
    let mut state = SqpState::new(problem, params)?;
    let mut trajectory = Vec::new();
    let termination = loop {
        if params.max_iterations.is_some_and(|cap| trajectory.len() >= cap) {
            break Termination::IterationLimit;
        }
        let (record, outcome) = sqp_iteration(&mut state, problem, oracle, params)?;
        if let Some(r) = record {
            trajectory.push(r);
        }
        match outcome {
            IterationOutcome::Step => {}
            IterationOutcome::InfeasibleStationary => break Termination::InfeasibleStationary,
            IterationOutcome::BudgetExhausted => break Termination::BudgetExhausted,
            IterationOutcome::Converged => break Termination::Converged,
        }
    };
    Ok(RunOutput { trajectory, termination, final_state: state })
}
