//! Strictly convex quadratic programs
//!
//! ```text
//!     minimize  0.5 z'Qz + q'z   subject to  A_eq z = b_eq,  A_in z >= b_in
//! ```
//!
//! with multipliers following `Qz + q + A_eq' y_eq - A_in' z_in = 0`, `z_in >= 0`.

mod active_set;
mod brute;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use active_set::{solve_qp, solve_qp_warm, ActiveSetOptions};
pub use brute::{brute_force_qp, BRUTE_FORCE_MAX_INEQUALITIES};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("inconsistent dimensions: {0}")]
    Dimension(String),
    #[error("Hessian is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("Hessian smallest eigenvalue {found:e} is below the floor {floor:e}")]
    NotConvex { found: f64, floor: f64 },
    #[error("{s} inequality constraints exceed the enumeration limit of {limit}")]
    DimensionTooLarge { s: usize, limit: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvexQp {
    pub q_mat: DMatrix<f64>,
    pub q: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_in: DMatrix<f64>,
    pub b_in: DVector<f64>,
}

impl ConvexQp {
    /// Validates shapes and symmetry; the convexity floor is checked separately
    /// by [`ConvexQp::check_convexity`].
    pub fn new(
        q_mat: DMatrix<f64>,
        q: DVector<f64>,
        a_eq: DMatrix<f64>,
        b_eq: DVector<f64>,
        a_in: DMatrix<f64>,
        b_in: DVector<f64>,
    ) -> Result<Self, QpError> {
        let p = q.len();
        if q_mat.nrows() != p || q_mat.ncols() != p {
            return Err(QpError::Dimension(format!("Q is {}x{}, q has {p} entries", q_mat.nrows(), q_mat.ncols())));
        }
        if a_eq.ncols() != p || a_eq.nrows() != b_eq.len() {
            return Err(QpError::Dimension(format!(
                "A_eq is {}x{}, b_eq has {} entries",
                a_eq.nrows(),
                a_eq.ncols(),
                b_eq.len()
            )));
        }
        if a_in.ncols() != p || a_in.nrows() != b_in.len() {
            return Err(QpError::Dimension(format!(
                "A_in is {}x{}, b_in has {} entries",
                a_in.nrows(),
                a_in.ncols(),
                b_in.len()
            )));
        }
        if a_eq.nrows() > p {
            return Err(QpError::Dimension(format!("{} equalities for {p} variables", a_eq.nrows())));
        }
        let asym = (&q_mat - q_mat.transpose()).amax();
        if asym > 1e-12 * q_mat.amax().max(1.0) {
            return Err(QpError::NotSymmetric(asym));
        }
        Ok(ConvexQp { q_mat, q, a_eq, b_eq, a_in, b_in })
    }

    pub fn unconstrained(q_mat: DMatrix<f64>, q: DVector<f64>) -> Result<Self, QpError> {
        let p = q.len();
        Self::new(q_mat, q, DMatrix::zeros(0, p), DVector::zeros(0), DMatrix::zeros(0, p), DVector::zeros(0))
    }

    pub fn check_convexity(&self, floor: f64) -> Result<(), QpError> {
        let found = crate::linalg::min_eigenvalue(&self.q_mat);
        if found < floor {
            return Err(QpError::NotConvex { found, floor });
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn n_in(&self) -> usize {
        self.b_in.len()
    }

    pub fn objective(&self, z: &DVector<f64>) -> f64 {
        0.5 * z.dot(&(&self.q_mat * z)) + self.q.dot(z)
    }

    /// Largest violation of the constraints at `z`.
    pub fn infeasibility(&self, z: &DVector<f64>) -> f64 {
        let eq = (&self.a_eq * z - &self.b_eq).amax();
        let ineq = (&self.b_in - &self.a_in * z).iter().fold(0.0_f64, |acc, v| acc.max(*v));
        eq.max(ineq)
    }

    /// Magnitude of the problem data, used to scale residual tolerances.
    pub(crate) fn data_scale(&self, z: &DVector<f64>) -> f64 {
        let qz = if z.is_empty() { 0.0 } else { (&self.q_mat * z).amax() };
        [1.0, self.q.amax(), qz, self.b_eq.amax(), self.b_in.amax()]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub z: DVector<f64>,
    pub y_eq: DVector<f64>,
    pub z_in: DVector<f64>,
    /// Inequality indices held at equality in the final working set, ascending.
    pub active_set: Vec<usize>,
    pub status: QpStatus,
    /// Largest KKT residual divided by `max(1, data scale)`.
    pub kkt_residual: f64,
    /// Working-set changes performed (phase 1 included).
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    pub stationarity: f64,
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    pub passed: bool,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal).max(self.dual).max(self.complementarity)
    }
}

pub fn verify_kkt(qp: &ConvexQp, sol: &QpSolution, tol: f64) -> KktReport {
    let z = &sol.z;
    let grad = &qp.q_mat * z + &qp.q + qp.a_eq.transpose() * &sol.y_eq - qp.a_in.transpose() * &sol.z_in;
    let stationarity = grad.amax();
    let primal = qp.infeasibility(z);
    let dual = sol.z_in.iter().fold(0.0_f64, |acc, v| acc.max(-v));
    let slack = &qp.a_in * z - &qp.b_in;
    let complementarity = sol
        .z_in
        .iter()
        .zip(slack.iter())
        .fold(0.0_f64, |acc, (l, s)| acc.max((l * s).abs()));
    let passed = stationarity <= tol && primal <= tol && dual <= tol && complementarity <= tol;
    KktReport { stationarity, primal, dual, complementarity, passed }
}

/// Scaled residual stored in [`QpSolution::kkt_residual`].
pub(crate) fn scaled_residual(qp: &ConvexQp, sol: &QpSolution) -> f64 {
    verify_kkt(qp, sol, 0.0).max() / qp.data_scale(&sol.z)
}
