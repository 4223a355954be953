//! Per-iteration invariants replayed from recorded trajectories.

use nalgebra::DVector;

use crate::linalg::norm_inf;
use crate::sqp::{IterationRecord, IterationStatus, StepRecord, Varphi};

const MODEL_REDUCTION_SLACK: f64 = 1e-9;
const INTERVAL_SLACK: f64 = 1e-12;
const ROOT_VALUE_TOL: f64 = 1e-10;
const ROOT_PROBE: f64 = 1e-6;
const LINEARIZED_FEAS_TOL: f64 = 1e-8;
const DIRECTION_SLACK: f64 = 1e-7;
const MERIT_SLACK: f64 = 1e-8;
const STATIONARITY_FLOOR: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub k: usize,
    pub invariant: &'static str,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub trajectories: usize,
    pub iterations: usize,
    pub violations: Vec<Violation>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Checks every trajectory of a concatenated trace.
    pub fn from_records(records: &[IterationRecord]) -> Self {
        let mut report = CheckReport::default();
        for t in split_trajectories(records) {
            report.merge(check_trajectory(t));
        }
        report
    }

    pub fn merge(&mut self, other: CheckReport) {
        self.trajectories += other.trajectories;
        self.iterations += other.iterations;
        self.violations.extend(other.violations);
    }
}

/// Splits a concatenated trace wherever the iteration counter restarts at 1.
pub fn split_trajectories(records: &[IterationRecord]) -> Vec<&[IterationRecord]> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..records.len() {
        if records[i].k == 1 {
            out.push(&records[start..i]);
            start = i;
        }
    }
    if !records.is_empty() {
        out.push(&records[start..]);
    }
    out
}

fn dv(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

struct Checker {
    violations: Vec<Violation>,
    k: usize,
}

impl Checker {
    fn require(&mut self, ok: bool, invariant: &'static str, detail: impl FnOnce() -> String) {
        if !ok {
            self.violations.push(Violation { k: self.k, invariant, detail: detail() });
        }
    }
}

pub fn check_trajectory(records: &[IterationRecord]) -> CheckReport {
    let mut c = Checker { violations: Vec::new(), k: 0 };
    let mut prev: Option<&StepRecord> = None;
    for (i, r) in records.iter().enumerate() {
        c.k = r.k;
        c.require(r.k == i + 1, "iteration_counter", || format!("record {i} has k = {}", r.k));
        c.require(r.x.iter().all(|v| *v >= 0.0), "x_nonnegative", || format!("min x = {:e}", r.x.iter().cloned().fold(f64::INFINITY, f64::min)));
        if let Some(p) = prev {
            c.require(p.x_next == r.x, "continuity", || "x differs from the previous x_next".into());
        }
        match (&r.status, &r.step) {
            (IterationStatus::InfeasibleStationary, None) => {
                c.require(i + 1 == records.len(), "terminal_status", || "infeasible stationarity reported mid-trajectory".into());
            }
            (IterationStatus::Step, Some(s)) => {
                if let Some(p) = prev {
                    c.require(s.tau_prev == p.tau && s.xi_prev == p.xi, "continuity", || "tau or xi not carried over".into());
                }
                check_step(&mut c, r, s);
                prev = Some(s);
            }
            _ => c.require(false, "record_shape", || "status and step data disagree".into()),
        }
    }
    CheckReport { trajectories: 1, iterations: records.len(), violations: c.violations }
}

fn check_step(c: &mut Checker, r: &IterationRecord, s: &StepRecord) {
    let (d, g, grad_f) = (dv(&s.d), dv(&s.g), dv(&s.grad_f));
    let jd = dv(&s.jd);
    let jv = dv(&r.jv);
    let x_next = dv(&s.x_next);

    c.require(x_next.iter().all(|v| *v >= 0.0), "x_nonnegative", || format!("min x_next = {:e}", x_next.min()));

    c.require(s.tau <= s.tau_prev && s.tau > 0.0, "tau_monotone", || format!("tau {} after {}", s.tau, s.tau_prev));
    c.require(s.tau == s.tau_prev || s.tau <= (1.0 - s.eps_tau) * s.tau_prev, "tau_factor", || {
        format!("tau {} not below (1 - eps_tau) * {}", s.tau, s.tau_prev)
    });
    c.require(s.xi <= s.xi_prev && s.xi > 0.0, "xi_monotone", || format!("xi {} after {}", s.xi, s.xi_prev));
    c.require(s.xi == s.xi_prev || s.xi <= (1.0 - s.eps_xi) * s.xi_prev, "xi_factor", || {
        format!("xi {} not below (1 - eps_xi) * {}", s.xi, s.xi_prev)
    });
    let xi_floor = 0.5 * s.zeta * (1.0 - s.eps_xi);
    c.require(s.xi >= xi_floor, "xi_lower_bound", || format!("xi {} below {xi_floor}", s.xi));

    let lower = 0.5 * s.tau * s.zeta * s.d_norm_sq + s.sigma * s.lin_gain;
    c.require(s.delta_l >= lower - MODEL_REDUCTION_SLACK, "model_reduction_lower", || {
        format!("delta_l {:e} below {:e}", s.delta_l, lower)
    });
    if !s.zero_step {
        c.require(s.delta_l > 0.0, "model_reduction_positive", || format!("delta_l {:e} for a nonzero step", s.delta_l));
    }

    let cap = 1.0_f64.min(s.alpha_phi) + INTERVAL_SLACK;
    c.require(0.0 < s.alpha_min && s.alpha_min <= s.alpha_max && s.alpha_max <= cap, "step_interval", || {
        format!("alpha_min {:e}, alpha_max {:e}, alpha_phi {:e}", s.alpha_min, s.alpha_max, s.alpha_phi)
    });
    c.require(s.alpha_min <= s.alpha && s.alpha <= s.alpha_max, "step_in_interval", || {
        format!("alpha {:e} outside [{:e}, {:e}]", s.alpha, s.alpha_min, s.alpha_max)
    });

    if !s.zero_step {
        let phi = Varphi {
            beta: s.beta,
            delta_l: s.delta_l,
            c: dv(&r.c),
            jd: jd.clone(),
            tau: s.tau,
            l: s.lipschitz_l,
            gamma: s.lipschitz_gamma,
            d_norm_sq: s.d_norm_sq,
            eta: s.eta,
        };
        let at = phi.eval(s.alpha_phi);
        let past = phi.eval(s.alpha_phi + ROOT_PROBE);
        c.require(at <= ROOT_VALUE_TOL && past > 0.0, "alpha_phi_root", || {
            format!("varphi({:e}) = {at:e}, varphi(+1e-6) = {past:e}", s.alpha_phi)
        });
    }

    let feas_gap = norm_inf(&(&jd - &jv));
    c.require(feas_gap <= LINEARIZED_FEAS_TOL, "linearized_feasibility", || format!("||Jd - Jv|| = {feas_gap:e}"));

    if let Some(t) = &s.truth {
        let d_true = dv(&t.d_true);
        let gap = (&d - &d_true).norm();
        let bound = (&g - &grad_f).norm() / s.zeta + DIRECTION_SLACK;
        c.require(gap <= bound, "direction_difference", || format!("||d - d_true|| = {gap:e} > {bound:e}"));
        c.require(t.stationarity >= STATIONARITY_FLOOR, "stationarity_nonnegative", || format!("{:e}", t.stationarity));
        if s.lipschitz_exact {
            let lhs = s.merit_next - s.merit;
            let rhs = -s.alpha * t.delta_l_true
                + s.alpha * s.tau * t.grad_dot_diff
                + (1.0 - s.eta) * s.alpha * s.beta * s.delta_l
                + MERIT_SLACK * (1.0 + s.merit.abs());
            c.require(lhs <= rhs, "merit_decrease", || format!("merit change {lhs:e} exceeds {rhs:e}"));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::suite::find_problem;
    use crate::problem::GradientOracle;
    use crate::sqp::{run, AlgoParams, LipschitzMode};

    fn trajectory() -> Vec<IterationRecord> {
        let p = find_problem("hs6").unwrap();
        let params = AlgoParams { max_gradient_samples: 300, lipschitz_mode: LipschitzMode::Analytic, ..AlgoParams::default() };
        run(&p, &mut GradientOracle::new(1e-2, 3), &params).unwrap().trajectory
    }

    #[test]
    fn recorded_run_passes() {
        let t = trajectory();
        let report = check_trajectory(&t);
        assert!(report.passed(), "{:?}", &report.violations[..report.violations.len().min(5)]);
        assert_eq!(report.iterations, t.len());
    }

    #[test]
    fn corrupted_records_flagged() {
        let mut t = trajectory();
        t[3].step.as_mut().unwrap().tau *= 1.5;
        t[5].x[0] = -1.0;
        t[7].step.as_mut().unwrap().alpha = 2.0;
        let report = check_trajectory(&t);
        let names: Vec<&str> = report.violations.iter().map(|v| v.invariant).collect();
        assert!(names.contains(&"tau_monotone"));
        assert!(names.contains(&"x_nonnegative"));
        assert!(names.contains(&"step_in_interval"));
    }

    #[test]
    fn split_at_restarts() {
        let t = trajectory();
        let mut both = t.clone();
        both.extend(t.iter().cloned());
        let parts = split_trajectories(&both);
        assert_eq!(parts.len(), 2);
        assert_eq!(CheckReport::from_records(&both).trajectories, 2);
        assert!(split_trajectories(&[]).is_empty());
    }
}
