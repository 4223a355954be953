//! Problem definitions in the form
//!
//! ```text
//!     minimize  f(x)   subject to  c(x) = 0,  x >= 0
//! ```
//!
//! where `f` is only accessible through (possibly noisy) gradient samples.
//! Problems are registered in code as named closures; see [`suite`] for the
//! built-in collection.

mod bounds;
mod oracle;
mod slack;
pub mod suite;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use bounds::{BoundsError, BoundsSpec, VariableMap, VariableRole};
pub use oracle::GradientOracle;
pub use slack::{add_slacks, InequalityProblem};

pub type ScalarFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("non-finite value in {component}")]
pub struct EvaluationError {
    pub component: String,
}

/// A primal-dual point satisfying the KKT conditions of the problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
}

/// Global Lipschitz constants of the objective gradient (`l`) and the
/// constraint Jacobian (`gamma`), valid over the nonnegative orthant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzConstants {
    pub l: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    /// Full-rank Jacobian and a documented KKT point.
    Regular,
    /// The documented start is an infeasible stationary point.
    InfeasibleStationary,
}

#[derive(Clone)]
pub struct NlpProblem {
    pub name: String,
    pub description: String,
    pub n: usize,
    pub m: usize,
    objective: ScalarFn,
    gradient: VectorFn,
    constraints: VectorFn,
    jacobian: MatrixFn,
    pub x0: DVector<f64>,
    pub known_solution: Option<KnownSolution>,
    pub lipschitz: Option<LipschitzConstants>,
    pub kind: ProblemKind,
}

impl fmt::Debug for NlpProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NlpProblem")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Objective, constraints and Jacobian bundled at one point.
#[derive(Debug, Clone)]
pub struct PointEval {
    pub f: f64,
    pub c: DVector<f64>,
    pub jac: DMatrix<f64>,
}

impl NlpProblem {
    /// `jacobian` returns the `m x n` matrix whose rows are the constraint
    /// gradients.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        n: usize,
        m: usize,
        objective: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
        gradient: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        constraints: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        assert!(m <= n, "more equality constraints than variables");
        NlpProblem {
            name: name.into(),
            description: String::new(),
            n,
            m,
            objective: Arc::new(objective),
            gradient: Arc::new(gradient),
            constraints: Arc::new(constraints),
            jacobian: Arc::new(jacobian),
            x0: DVector::zeros(n),
            known_solution: None,
            lipschitz: None,
            kind: ProblemKind::Regular,
        }
    }

    pub(crate) fn from_parts(
        name: String,
        n: usize,
        m: usize,
        objective: ScalarFn,
        gradient: VectorFn,
        constraints: VectorFn,
        jacobian: MatrixFn,
    ) -> Self {
        NlpProblem {
            name,
            description: String::new(),
            n,
            m,
            objective,
            gradient,
            constraints,
            jacobian,
            x0: DVector::zeros(n),
            known_solution: None,
            lipschitz: None,
            kind: ProblemKind::Regular,
        }
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = text.into();
        self
    }

    pub fn with_start(mut self, x0: DVector<f64>) -> Self {
        assert_eq!(x0.len(), self.n);
        self.x0 = x0;
        self
    }

    pub fn with_solution(mut self, x: DVector<f64>, y: DVector<f64>, z: DVector<f64>) -> Self {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.m);
        assert_eq!(z.len(), self.n);
        self.known_solution = Some(KnownSolution { x, y, z });
        self
    }

    pub fn with_lipschitz(mut self, l: f64, gamma: f64) -> Self {
        self.lipschitz = Some(LipschitzConstants { l, gamma });
        self
    }

    pub fn with_kind(mut self, kind: ProblemKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        (self.objective)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    pub fn constraints(&self, x: &DVector<f64>) -> DVector<f64> {
        if self.m == 0 {
            return DVector::zeros(0);
        }
        (self.constraints)(x)
    }

    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        if self.m == 0 {
            return DMatrix::zeros(0, self.n);
        }
        (self.jacobian)(x)
    }

    pub(crate) fn parts(&self) -> (ScalarFn, VectorFn, VectorFn, MatrixFn) {
        (
            self.objective.clone(),
            self.gradient.clone(),
            self.constraints.clone(),
            self.jacobian.clone(),
        )
    }

    /// Merit function `tau * f(x) + ||c(x)||_2`.
    pub fn merit(&self, x: &DVector<f64>, tau: f64) -> f64 {
        tau * self.objective(x) + self.constraints(x).norm()
    }
}

pub fn eval_point(problem: &NlpProblem, x: &DVector<f64>) -> Result<PointEval, EvaluationError> {
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(EvaluationError { component: format!("x[{i}]") });
    }
    let f = problem.objective(x);
    if !f.is_finite() {
        return Err(EvaluationError { component: "objective".into() });
    }
    let c = problem.constraints(x);
    if let Some(i) = c.iter().position(|v| !v.is_finite()) {
        return Err(EvaluationError { component: format!("constraints[{i}]") });
    }
    let jac = problem.jacobian(x);
    for i in 0..jac.nrows() {
        for j in 0..jac.ncols() {
            if !jac[(i, j)].is_finite() {
                return Err(EvaluationError { component: format!("jacobian[{i},{j}]") });
            }
        }
    }
    Ok(PointEval { f, c, jac })
}

/// Largest relative discrepancy between the analytic Jacobian (and gradient)
/// and central finite differences at `x`.
pub fn derivative_check(problem: &NlpProblem, x: &DVector<f64>) -> f64 {
    let h = 1e-6;
    let grad = problem.gradient(x);
    let jac = problem.jacobian(x);
    let mut worst = 0.0_f64;
    for j in 0..problem.n {
        let mut xp = x.clone();
        let mut xm = x.clone();
        let step = h * x[j].abs().max(1.0);
        xp[j] += step;
        xm[j] -= step;
        let fd = (problem.objective(&xp) - problem.objective(&xm)) / (2.0 * step);
        worst = worst.max((fd - grad[j]).abs() / grad[j].abs().max(1.0));
        if problem.m > 0 {
            let cp = problem.constraints(&xp);
            let cm = problem.constraints(&xm);
            for i in 0..problem.m {
                let fd = (cp[i] - cm[i]) / (2.0 * step);
                worst = worst.max((fd - jac[(i, j)]).abs() / jac[(i, j)].abs().max(1.0));
            }
        }
    }
    worst
}
