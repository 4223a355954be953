use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BetaSchedule {
    Constant,
    /// `beta_k = beta / (k - k_hat + 1)`, with `k_hat` the last restart.
    Diminishing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LipschitzMode {
    /// Refresh from sampled differences around the iterate.
    Estimate,
    /// Use `lipschitz_l` and `lipschitz_gamma` as given.
    Fixed,
    /// Use the constants declared by the problem.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPolicy {
    /// `min{1, base^t alpha_min, alpha_min + theta beta}` with the largest
    /// admissible `t`.
    Grid,
    Max,
    Min,
}

#[derive(Debug, Error)]
pub enum ParamsFileError {
    #[error("malformed parameter file: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] ParamsError),
}

impl std::str::FromStr for StepPolicy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "grid" => Ok(StepPolicy::Grid),
            "max" => Ok(StepPolicy::Max),
            "min" => Ok(StepPolicy::Min),
            other => Err(format!("unknown step policy `{other}` (expected grid, max or min)")),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid parameter {name}: {reason}")]
pub struct ParamsError {
    pub name: &'static str,
    pub reason: String,
}

/// Algorithm parameters. Serialized as a flat JSON object; unknown keys are
/// rejected and missing keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlgoParams {
    pub sigma: f64,
    pub eta: f64,
    pub eps_tau: f64,
    pub eps_xi: f64,
    pub tau0: f64,
    pub xi0: f64,
    pub theta: f64,
    pub beta: f64,
    pub beta_schedule: BetaSchedule,
    pub beta_restart: bool,
    pub psi: f64,
    pub lipschitz_mode: LipschitzMode,
    pub lipschitz_l: f64,
    pub lipschitz_gamma: f64,
    pub estimate_every: usize,
    pub estimate_samples: usize,
    /// Sampling radius is `estimate_radius * max(1, ||x||_inf)`.
    pub estimate_radius: f64,
    pub lipschitz_floor: f64,
    pub count_estimation_samples: bool,
    /// `H_k = h_scale * I`.
    pub h_scale: f64,
    pub zeta: f64,
    pub kappa_h: f64,
    pub max_gradient_samples: u64,
    pub max_iterations: Option<usize>,
    pub step_policy: StepPolicy,
    pub grid_base: f64,
    pub mu_floor: f64,
    pub mu_factor: f64,
    pub qp_tol: f64,
    pub feas_tol: f64,
    pub step_tol: f64,
    pub zero_step_tol: f64,
    pub deterministic: bool,
    pub compute_true_direction: bool,
    pub early_stop: Option<f64>,
    /// Scale the noise covariance by `(beta_k / beta)^2`.
    pub anneal_noise: bool,
}

impl Default for AlgoParams {
    fn default() -> Self {
        AlgoParams {
            sigma: 0.1,
            eta: 0.5,
            eps_tau: 1e-2,
            eps_xi: 1e-2,
            tau0: 0.1,
            xi0: 1.0,
            theta: 1e4,
            beta: 1.0,
            beta_schedule: BetaSchedule::Constant,
            beta_restart: false,
            psi: 1.0,
            lipschitz_mode: LipschitzMode::Estimate,
            lipschitz_l: 1.0,
            lipschitz_gamma: 1.0,
            estimate_every: 100,
            estimate_samples: 10,
            estimate_radius: 1e-2,
            lipschitz_floor: 1e-4,
            count_estimation_samples: true,
            h_scale: 1.0,
            zeta: 1.0,
            kappa_h: 1.0,
            max_gradient_samples: 10_000,
            max_iterations: None,
            step_policy: StepPolicy::Grid,
            grid_base: 1.1,
            mu_floor: 1e-8,
            mu_factor: 1e-4,
            qp_tol: 1e-9,
            feas_tol: 1e-8,
            step_tol: 1e-9,
            zero_step_tol: 1e-10,
            deterministic: false,
            compute_true_direction: true,
            early_stop: None,
            anneal_noise: false,
        }
    }
}

fn open_unit(name: &'static str, v: f64) -> Result<(), ParamsError> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(ParamsError { name, reason: format!("{v} is not in (0, 1)") })
    }
}

fn positive(name: &'static str, v: f64) -> Result<(), ParamsError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ParamsError { name, reason: format!("{v} is not a positive finite number") })
    }
}

impl AlgoParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        open_unit("sigma", self.sigma)?;
        open_unit("eta", self.eta)?;
        open_unit("eps_tau", self.eps_tau)?;
        open_unit("eps_xi", self.eps_xi)?;
        positive("tau0", self.tau0)?;
        positive("xi0", self.xi0)?;
        positive("theta", self.theta)?;
        positive("beta", self.beta)?;
        if self.beta > 1.0 {
            return Err(ParamsError { name: "beta", reason: format!("{} exceeds 1", self.beta) });
        }
        if !(self.psi > 0.0 && self.psi <= 1.0) {
            return Err(ParamsError { name: "psi", reason: format!("{} is not in (0, 1]", self.psi) });
        }
        positive("lipschitz_l", self.lipschitz_l)?;
        positive("lipschitz_gamma", self.lipschitz_gamma)?;
        positive("estimate_radius", self.estimate_radius)?;
        positive("lipschitz_floor", self.lipschitz_floor)?;
        if self.estimate_every == 0 {
            return Err(ParamsError { name: "estimate_every", reason: "must be at least 1".into() });
        }
        if self.estimate_samples < 2 {
            return Err(ParamsError { name: "estimate_samples", reason: "must be at least 2".into() });
        }
        positive("h_scale", self.h_scale)?;
        positive("zeta", self.zeta)?;
        if self.kappa_h < self.zeta {
            return Err(ParamsError { name: "kappa_h", reason: format!("{} is below zeta = {}", self.kappa_h, self.zeta) });
        }
        if self.h_scale < self.zeta || self.h_scale > self.kappa_h {
            return Err(ParamsError {
                name: "h_scale",
                reason: format!("{} is outside [zeta, kappa_h] = [{}, {}]", self.h_scale, self.zeta, self.kappa_h),
            });
        }
        if self.grid_base <= 1.0 {
            return Err(ParamsError { name: "grid_base", reason: format!("{} must exceed 1", self.grid_base) });
        }
        positive("mu_floor", self.mu_floor)?;
        if self.mu_factor < 0.0 {
            return Err(ParamsError { name: "mu_factor", reason: "must be nonnegative".into() });
        }
        positive("qp_tol", self.qp_tol)?;
        positive("feas_tol", self.feas_tol)?;
        positive("step_tol", self.step_tol)?;
        positive("zero_step_tol", self.zero_step_tol)?;
        Ok(())
    }

    /// Parses a flat JSON object of overrides; absent keys keep their defaults.
    pub fn from_json(text: &str) -> Result<Self, ParamsFileError> {
        let params: AlgoParams = serde_json::from_str(text)?;
        params.validate()?;
        Ok(params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        AlgoParams::default().validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_partial_overrides() {
        let p = AlgoParams::from_json(r#"{"sigma": 0.2, "step_policy": "max"}"#).unwrap();
        assert_eq!(p.sigma, 0.2);
        assert_eq!(p.step_policy, StepPolicy::Max);
        assert_eq!(p.eta, 0.5);
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(AlgoParams::from_json(&text).unwrap(), p);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(AlgoParams::from_json(r#"{"sigmaa": 0.2}"#).is_err());
    }

    #[test]
    fn out_of_range_rejected() {
        let p = AlgoParams { eta: 1.0, ..AlgoParams::default() };
        assert_eq!(p.validate().unwrap_err().name, "eta");
        let p = AlgoParams { zeta: 2.0, kappa_h: 1.0, ..AlgoParams::default() };
        assert_eq!(p.validate().unwrap_err().name, "kappa_h");
    }
}
