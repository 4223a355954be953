//! Merit and ratio parameter updates.
//!
//! A trial value of `f64::INFINITY` means "no restriction".

use nalgebra::DVector;

/// Returns `(tau_trial, tau)`. `lin_gain` is `||c|| - ||c + J d||`.
pub fn update_merit_parameter(tau_prev: f64, d: &DVector<f64>, quad_value: f64, lin_gain: f64, sigma: f64, eps_tau: f64) -> (f64, f64) {
    if d.iter().all(|v| *v == 0.0) {
        return (f64::INFINITY, tau_prev);
    }
    // a nonpositive gain with a positive model value only arises from roundoff
    // near feasibility; the trial value would be zero or negative
    let tau_trial = if quad_value <= 0.0 || lin_gain <= 0.0 {
        f64::INFINITY
    } else {
        (1.0 - sigma) * lin_gain / quad_value
    };
    let tau = if tau_prev <= tau_trial {
        tau_prev
    } else {
        ((1.0 - eps_tau) * tau_prev).min(tau_trial)
    };
    (tau_trial, tau)
}

/// Returns `(xi_trial, xi)` with `xi_trial = delta_l / (tau ||d||^2)`.
pub fn update_ratio_parameter(xi_prev: f64, delta_l: f64, tau: f64, d_norm_sq: f64, eps_xi: f64) -> (f64, f64) {
    if d_norm_sq == 0.0 {
        return (f64::INFINITY, xi_prev);
    }
    let xi_trial = delta_l / (tau * d_norm_sq);
    let xi = if xi_prev <= xi_trial {
        xi_prev
    } else {
        ((1.0 - eps_xi) * xi_prev).min(xi_trial)
    };
    (xi_trial, xi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d() -> DVector<f64> {
        DVector::from_vec(vec![1.0, 0.0])
    }

    #[test]
    fn zero_direction_keeps_tau() {
        assert_eq!(update_merit_parameter(0.1, &DVector::zeros(2), 1.0, 1.0, 0.1, 0.01), (f64::INFINITY, 0.1));
    }

    #[test]
    fn tau_kept_when_trial_is_larger() {
        let (trial, tau) = update_merit_parameter(0.1, &d(), 3.0, 1.0, 0.1, 0.01);
        assert!((trial - 0.3).abs() < 1e-15);
        assert_eq!(tau, 0.1);
    }

    #[test]
    fn tau_drops_to_trial() {
        let (trial, tau) = update_merit_parameter(0.1, &d(), 18.0, 1.0, 0.1, 0.01);
        assert!((trial - 0.05).abs() < 1e-15);
        assert!((tau - 0.05).abs() < 1e-15);
    }

    #[test]
    fn tau_drops_by_at_least_the_factor() {
        let (_, tau) = update_merit_parameter(0.1, &d(), 0.9 / 0.0995, 1.0, 0.1, 0.01);
        assert!((tau - 0.099).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_model_value_gives_infinite_trial() {
        assert_eq!(update_merit_parameter(0.1, &d(), -1.0, 1.0, 0.1, 0.01), (f64::INFINITY, 0.1));
        assert_eq!(update_merit_parameter(0.1, &d(), 0.0, 1.0, 0.1, 0.01), (f64::INFINITY, 0.1));
    }

    #[test]
    fn ratio_updates() {
        assert_eq!(update_ratio_parameter(1.0, 0.0, 0.1, 0.0, 0.01), (f64::INFINITY, 1.0));
        let (trial, xi) = update_ratio_parameter(1.0, 0.5, 0.1, 1.0, 0.01);
        assert!((trial - 5.0).abs() < 1e-15);
        assert_eq!(xi, 1.0);
        let (trial, xi) = update_ratio_parameter(1.0, 0.05, 0.1, 10.0, 0.01);
        assert!((trial - 0.05).abs() < 1e-15);
        assert!((xi - 0.05).abs() < 1e-15);
    }
}
