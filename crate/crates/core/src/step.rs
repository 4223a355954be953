//! Normal and tangential subproblems.
//!
//! The normal step `v = u + J'w` solves
//!
//! ```text
//!     min  0.5 ||c + J J' w||^2 + 0.5 mu ||u||^2   s.t.  J u = 0,  x + u + J'w >= 0
//! ```
//!
//! and the tangential step `d` solves
//!
//! ```text
//!     min  g'd + 0.5 d'Hd   s.t.  J d = J v,  x + d >= 0.
//! ```

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{linearized_gain, norm_inf};
use crate::qp::{solve_qp_warm, ActiveSetOptions, ConvexQp, QpError, QpStatus};

/// Diagonal shift added to the `(JJ')^2` block of the normal subproblem.
const GRAM_REGULARIZATION: f64 = 1e-12;
/// Relative singular-value threshold below which `J` is reported rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Relative size of `x + d < 0` violations attributed to roundoff.
const VIOLATION_SNAP: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StepError {
    #[error("{subproblem} subproblem ended with status {status:?} (residual {residual:e})")]
    Solver { subproblem: &'static str, status: QpStatus, residual: f64 },
    #[error("malformed {subproblem} subproblem: {source}")]
    Setup {
        subproblem: &'static str,
        #[source]
        source: QpError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalStep {
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub v: DVector<f64>,
    /// `||c|| - ||c + J v||`.
    pub lin_feas_gain: f64,
    pub rank_deficient: bool,
    pub qp_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TangentialStep {
    pub d: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    /// `g'd + 0.5 d'Hd`.
    pub quad_value: f64,
    pub qp_iterations: usize,
}

/// Default proximal weight `max(1e-8, 1e-4 ||c||^2)`.
pub fn default_mu(c: &DVector<f64>) -> f64 {
    (1e-4 * c.norm_squared()).max(1e-8)
}

fn is_rank_deficient(j: &DMatrix<f64>) -> bool {
    if j.nrows() == 0 {
        return false;
    }
    let sv = j.clone().svd(false, false).singular_values;
    let max = sv.iter().cloned().fold(0.0, f64::max);
    let min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    max == 0.0 || min <= RANK_TOL * max
}

fn bound_hint(point: &DVector<f64>) -> Vec<usize> {
    let scale = norm_inf(point).max(1.0);
    (0..point.len()).filter(|&i| point[i] <= 1e-12 * scale).collect()
}

pub fn normal_step(x: &DVector<f64>, c: &DVector<f64>, j: &DMatrix<f64>, mu: f64, qp_tol: f64) -> Result<NormalStep, StepError> {
    let (n, m) = (x.len(), c.len());
    if m == 0 || c.iter().all(|ci| *ci == 0.0) {
        return Ok(NormalStep {
            u: DVector::zeros(n),
            w: DVector::zeros(m),
            v: DVector::zeros(n),
            lin_feas_gain: 0.0,
            rank_deficient: is_rank_deficient(j),
            qp_iterations: 0,
        });
    }
    let rank_deficient = is_rank_deficient(j);
    if rank_deficient {
        log::warn!("constraint Jacobian is rank deficient; continuing with the regularized normal subproblem");
    }
    let gram = j * j.transpose();
    let p = n + m;
    let mut q_mat = DMatrix::zeros(p, p);
    q_mat.view_mut((0, 0), (n, n)).fill_diagonal(mu);
    let mut ww = gram.transpose() * &gram;
    // exact symmetry for the QP validation
    ww = (&ww + ww.transpose()) * 0.5;
    for i in 0..m {
        ww[(i, i)] += GRAM_REGULARIZATION;
    }
    q_mat.view_mut((n, n), (m, m)).copy_from(&ww);
    let mut q = DVector::zeros(p);
    q.rows_mut(n, m).copy_from(&(gram.transpose() * c));
    let mut a_eq = DMatrix::zeros(m, p);
    a_eq.view_mut((0, 0), (m, n)).copy_from(j);
    let mut a_in = DMatrix::zeros(n, p);
    a_in.view_mut((0, 0), (n, n)).fill_diagonal(1.0);
    a_in.view_mut((0, n), (n, m)).copy_from(&j.transpose());
    let qp = ConvexQp::new(q_mat, q, a_eq, DVector::zeros(m), a_in, -x)
        .map_err(|source| StepError::Setup { subproblem: "normal", source })?;

    let start = DVector::zeros(p);
    let sol = solve_qp_warm(&qp, Some(&start), &bound_hint(x), &ActiveSetOptions { tol: qp_tol, max_iter: None });
    if sol.status != QpStatus::Optimal {
        return Err(StepError::Solver { subproblem: "normal", status: sol.status, residual: sol.kkt_residual });
    }
    let u = sol.z.rows(0, n).into_owned();
    let w = sol.z.rows(n, m).into_owned();
    let v = &u + j.transpose() * &w;
    let lin_feas_gain = linearized_gain(c, &(j * &v));
    Ok(NormalStep { u, w, v, lin_feas_gain, rank_deficient, qp_iterations: sol.iterations })
}

/// `||c||_inf > feas_tol` while the normal step vanishes relative to `||c||_inf`.
/// Near a feasible point `v` shrinks in proportion to `c`, so the threshold
/// is relative even when `||c||_inf < 1`.
pub fn is_infeasible_stationary(c: &DVector<f64>, v: &DVector<f64>, feas_tol: f64, step_tol: f64) -> bool {
    let c_inf = norm_inf(c);
    c_inf > feas_tol && norm_inf(v) <= step_tol * c_inf
}

pub fn tangential_step(
    x: &DVector<f64>,
    g: &DVector<f64>,
    h: &DMatrix<f64>,
    j: &DMatrix<f64>,
    v: &DVector<f64>,
    qp_tol: f64,
) -> Result<TangentialStep, StepError> {
    let n = x.len();
    let qp = ConvexQp::new(h.clone(), g.clone(), j.clone(), j * v, DMatrix::identity(n, n), -x)
        .map_err(|source| StepError::Setup { subproblem: "tangential", source })?;
    let sol = solve_qp_warm(&qp, Some(v), &bound_hint(&(x + v)), &ActiveSetOptions { tol: qp_tol, max_iter: None });
    if sol.status != QpStatus::Optimal {
        return Err(StepError::Solver { subproblem: "tangential", status: sol.status, residual: sol.kkt_residual });
    }
    let mut d = sol.z;
    // snap roundoff-level bound violations onto the bound
    let scale = norm_inf(x).max(1.0);
    for i in 0..n {
        if x[i] + d[i] < 0.0 && x[i] + d[i] >= -VIOLATION_SNAP * scale {
            d[i] = -x[i];
        }
    }
    let quad_value = g.dot(&d) + 0.5 * d.dot(&(h * &d));
    Ok(TangentialStep { d, y: sol.y_eq, z: sol.z_in, quad_value, qp_iterations: sol.iterations })
}

/// `-tau g'd + ||c|| - ||c + J d||`.
pub fn model_reduction(tau: f64, g: &DVector<f64>, d: &DVector<f64>, c: &DVector<f64>, j: &DMatrix<f64>) -> f64 {
    -tau * g.dot(d) + linearized_gain(c, &(j * d))
}
