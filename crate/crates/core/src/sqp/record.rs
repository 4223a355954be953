use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IterationStatus {
    Step,
    InfeasibleStationary,
}

/// Everything computed in one iteration. Trial values of `None` stand for
/// an unrestricted (infinite) trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    /// 1-based iteration index.
    pub k: usize,
    pub status: IterationStatus,
    pub x: Vec<f64>,
    pub c: Vec<f64>,
    /// `J v`.
    pub jv: Vec<f64>,
    pub v: Vec<f64>,
    pub mu: f64,
    pub normal_gain: f64,
    pub feas_err: f64,
    pub samples_used: u64,
    pub rank_deficient: bool,
    pub step: Option<StepRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub g: Vec<f64>,
    /// Exact gradient at `x`.
    pub grad_f: Vec<f64>,
    pub d: Vec<f64>,
    /// `J d`.
    pub jd: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub quad_value: f64,
    pub zero_step: bool,
    pub tau_prev: f64,
    pub tau_trial: Option<f64>,
    pub tau: f64,
    pub xi_prev: f64,
    pub xi_trial: Option<f64>,
    pub xi: f64,
    pub beta: f64,
    pub lipschitz_l: f64,
    pub lipschitz_gamma: f64,
    /// Whether `L` and `Gamma` are the problem's global constants.
    pub lipschitz_exact: bool,
    pub alpha_min: f64,
    pub alpha_min_clamped: bool,
    pub alpha_phi: f64,
    pub alpha_max: f64,
    /// Set when roundoff put `alpha_max` below `alpha_min` and it was raised.
    pub alpha_max_raised: bool,
    pub alpha: f64,
    pub delta_l: f64,
    /// `||c|| - ||c + J d||`.
    pub lin_gain: f64,
    pub d_norm_sq: f64,
    pub merit: f64,
    pub merit_next: f64,
    pub x_next: Vec<f64>,
    pub truth: Option<TrueDirectionRecord>,
    /// Constants in force, so that a trace can be checked on its own.
    pub sigma: f64,
    pub eta: f64,
    pub eps_tau: f64,
    pub eps_xi: f64,
    pub zeta: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueDirectionRecord {
    pub d_true: Vec<f64>,
    pub y_true: Vec<f64>,
    pub z_true: Vec<f64>,
    /// `Delta l(x, tau, grad f, d_true)`.
    pub delta_l_true: f64,
    /// `grad f' (d - d_true)`.
    pub grad_dot_diff: f64,
    /// `(1 - sigma) gain(d_true) / (grad f'd_true + 0.5 d_true'H d_true)`.
    pub tau_true_trial: Option<f64>,
    pub kkt_err: f64,
    pub stationarity: f64,
}

impl IterationRecord {
    pub fn kkt_err(&self) -> Option<f64> {
        self.step.as_ref().and_then(|s| s.truth.as_ref()).map(|t| t.kkt_err)
    }
}
