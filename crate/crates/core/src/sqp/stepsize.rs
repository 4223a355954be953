//! Step-size interval `[alpha_min, alpha_max]` and the choice within it.

use nalgebra::DVector;
use thiserror::Error;

use super::params::StepPolicy;
use crate::linalg::linearized_gain;

const BRACKET_LIMIT: f64 = 1e6;
const BISECTION_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepSizeError {
    #[error("varphi stays nonpositive up to alpha = {limit:e}")]
    BracketFailure { limit: f64 },
}

/// Returns `(min{1, 2(1-eta) beta xi tau / (tau L + Gamma)}, clamped)`.
pub fn alpha_min(beta: f64, xi: f64, tau: f64, l: f64, gamma: f64, eta: f64) -> (f64, bool) {
    let raw = 2.0 * (1.0 - eta) * beta * xi * tau / (tau * l + gamma);
    if raw > 1.0 {
        (1.0, true)
    } else {
        (raw, false)
    }
}

/// Data defining the strongly convex function `varphi` of one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Varphi {
    pub beta: f64,
    pub delta_l: f64,
    pub c: DVector<f64>,
    pub jd: DVector<f64>,
    pub tau: f64,
    pub l: f64,
    pub gamma: f64,
    pub d_norm_sq: f64,
    pub eta: f64,
}

impl Varphi {
    /// `(eta-1) a beta dl + ||c + a Jd|| - ||c|| + a (||c|| - ||c + Jd||) + 0.5 (tau L + Gamma) a^2 ||d||^2`,
    /// with both norm differences evaluated in cancellation-free form.
    pub fn eval(&self, alpha: f64) -> f64 {
        let scaled = &self.jd * alpha;
        (self.eta - 1.0) * alpha * self.beta * self.delta_l - linearized_gain(&self.c, &scaled)
            + alpha * linearized_gain(&self.c, &self.jd)
            + 0.5 * (self.tau * self.l + self.gamma) * alpha * alpha * self.d_norm_sq
    }

    fn has_closed_form(&self) -> bool {
        self.c.is_empty() || (self.c.iter().all(|v| *v == 0.0)) || self.jd.iter().all(|v| *v == 0.0)
    }

    /// Largest `alpha >= 0` with `varphi(alpha) <= 0`.
    pub fn alpha_phi(&self) -> Result<f64, StepSizeError> {
        let curvature = (self.tau * self.l + self.gamma) * self.d_norm_sq;
        if self.has_closed_form() {
            // the norm terms cancel and varphi is a quadratic through the origin
            return Ok((2.0 * (1.0 - self.eta) * self.beta * self.delta_l / curvature).max(0.0));
        }
        let mut hi = 1.0;
        while self.eval(hi) <= 0.0 {
            hi *= 2.0;
            if hi > BRACKET_LIMIT {
                return Err(StepSizeError::BracketFailure { limit: BRACKET_LIMIT });
            }
        }
        let mut lo = 0.0;
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.eval(mid) <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(lo)
    }
}

/// Free-function form of [`Varphi::eval`].
#[allow(clippy::too_many_arguments)]
pub fn eval_varphi(
    alpha: f64,
    beta: f64,
    delta_l: f64,
    c: &DVector<f64>,
    jd: &DVector<f64>,
    tau: f64,
    l: f64,
    gamma: f64,
    d_norm_sq: f64,
    eta: f64,
) -> f64 {
    Varphi { beta, delta_l, c: c.clone(), jd: jd.clone(), tau, l, gamma, d_norm_sq, eta }.eval(alpha)
}

/// Picks a step size in `[alpha_min, alpha_max]`.
pub fn select_step_size(
    alpha_min: f64,
    alpha_max: f64,
    policy: StepPolicy,
    grid_base: f64,
    theta_beta: f64,
    varphi: impl Fn(f64) -> f64,
) -> f64 {
    if alpha_max <= alpha_min {
        return alpha_min;
    }
    let alpha = match policy {
        StepPolicy::Max => alpha_max,
        StepPolicy::Min => alpha_min,
        StepPolicy::Grid => {
            let mut t = 0i32;
            // once the grid point passes 1 the min with 1 decides the value
            while alpha_min * grid_base.powi(t) <= 1.0 && varphi(alpha_min * grid_base.powi(t + 1)) <= 0.0 {
                t += 1;
            }
            (alpha_min * grid_base.powi(t)).min(1.0).min(alpha_min + theta_beta)
        }
    };
    alpha.clamp(alpha_min, alpha_max)
}
