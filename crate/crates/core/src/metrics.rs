//! Feasibility and KKT error measures and best-iterate selection.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{linearized_gain, norm_inf};
use crate::problem::NlpProblem;
use crate::step::{tangential_step, StepError, TangentialStep};

pub const DEFAULT_FEAS_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MetricsError {
    #[error("trajectory is empty")]
    EmptyTrajectory,
    #[error("iteration {0} has no true-gradient multipliers")]
    MissingTrueMultipliers(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub feas_err: f64,
    pub kkt_err: f64,
    pub stationarity: f64,
    pub k_best: usize,
}

pub fn feas_err(c: &DVector<f64>) -> f64 {
    norm_inf(c)
}

/// Sup-norm of `grad f + J'y - z`, `c`, `min(x, 0)`, `min(z, 0)` and `x .* z`.
pub fn kkt_err(x: &DVector<f64>, grad_f: &DVector<f64>, c: &DVector<f64>, j: &DMatrix<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
    let stationarity = norm_inf(&(grad_f + j.transpose() * y - z));
    let sign_x = x.iter().fold(0.0_f64, |acc, v| acc.max(-v));
    let sign_z = z.iter().fold(0.0_f64, |acc, v| acc.max(-v));
    let compl = x.iter().zip(z.iter()).fold(0.0_f64, |acc, (a, b)| acc.max((a * b).abs()));
    stationarity.max(norm_inf(c)).max(sign_x).max(sign_z).max(compl)
}

/// Tangential step with the exact gradient and its multipliers.
pub fn true_direction(
    x: &DVector<f64>,
    problem: &NlpProblem,
    h: &DMatrix<f64>,
    j: &DMatrix<f64>,
    v: &DVector<f64>,
    qp_tol: f64,
) -> Result<TangentialStep, StepError> {
    tangential_step(x, &problem.gradient(x), h, j, v, qp_tol)
}

/// `0.5 tau zeta ||d||^2 + sigma (||c|| - ||c + J d||)`.
pub fn stationarity_measure(tau: f64, zeta: f64, sigma: f64, d_true: &DVector<f64>, c: &DVector<f64>, j: &DMatrix<f64>) -> f64 {
    0.5 * tau * zeta * d_true.norm_squared() + sigma * linearized_gain(c, &(j * d_true))
}

/// Index of the best iterate: the least KKT error among iterates with
/// feasibility error at most `threshold`, or the least feasibility error if
/// there are none. Ties go to the lowest index.
pub fn best_iterate(feas: &[f64], kkt: &[Option<f64>], threshold: f64) -> Result<usize, MetricsError> {
    assert_eq!(feas.len(), kkt.len());
    if feas.is_empty() {
        return Err(MetricsError::EmptyTrajectory);
    }
    let feasible: Vec<usize> = (0..feas.len()).filter(|&k| feas[k] <= threshold).collect();
    if feasible.is_empty() {
        let mut best = 0;
        for k in 1..feas.len() {
            if feas[k] < feas[best] {
                best = k;
            }
        }
        return Ok(best);
    }
    let mut best: Option<(usize, f64)> = None;
    for k in feasible {
        let err = kkt[k].ok_or(MetricsError::MissingTrueMultipliers(k))?;
        if best.is_none_or(|(_, b)| err < b) {
            best = Some((k, err));
        }
    }
    Ok(best.map(|(k, _)| k).expect("nonempty feasible set"))
}
