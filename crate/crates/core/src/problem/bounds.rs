use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use super::NlpProblem;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundsError {
    #[error("bounds have length {lower}/{upper}, problem has {n} variables")]
    Dimension { lower: usize, upper: usize, n: usize },
    #[error("lower bound exceeds upper bound at variable {0}")]
    Crossed(usize),
    #[error("bound {0} is NaN")]
    NaN(usize),
}

/// Componentwise bounds `lower <= x <= upper`, with infinite entries allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// How one original variable is expressed through nonnegative variables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VariableRole {
    /// `x = lower + y`
    Shift { lower: f64 },
    /// `x = upper - y`
    Reflect { upper: f64 },
    /// `x = lower + y` with the extra row `y + s = upper - lower`
    Box { lower: f64, upper: f64, slack: usize, row: usize },
    /// `x = y - y_neg`
    Free { neg: usize },
}

/// Correspondence between original variables and the nonnegative variables of
/// the reformulated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableMap {
    pub roles: Vec<VariableRole>,
    pub n_standard: usize,
    pub m_standard: usize,
}

impl BoundsSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, BoundsError> {
        if lower.len() != upper.len() {
            return Err(BoundsError::Dimension { lower: lower.len(), upper: upper.len(), n: lower.len() });
        }
        for (i, (l, u)) in lower.iter().zip(&upper).enumerate() {
            if l.is_nan() || u.is_nan() {
                return Err(BoundsError::NaN(i));
            }
            if l > u {
                return Err(BoundsError::Crossed(i));
            }
        }
        Ok(BoundsSpec { lower, upper })
    }

    pub fn nonnegative(n: usize) -> Self {
        BoundsSpec { lower: vec![0.0; n], upper: vec![f64::INFINITY; n] }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(xi, (l, u))| *xi >= l - tol && *xi <= u + tol)
    }

    fn variable_map(&self, m: usize) -> VariableMap {
        let n = self.len();
        let mut extra = n;
        let mut rows = m;
        let roles = self
            .lower
            .iter()
            .zip(&self.upper)
            .map(|(&lower, &upper)| match (lower.is_finite(), upper.is_finite()) {
                (true, false) => VariableRole::Shift { lower },
                (false, true) => VariableRole::Reflect { upper },
                (true, true) => {
                    let role = VariableRole::Box { lower, upper, slack: extra, row: rows };
                    extra += 1;
                    rows += 1;
                    role
                }
                (false, false) => {
                    let role = VariableRole::Free { neg: extra };
                    extra += 1;
                    role
                }
            })
            .collect();
        VariableMap { roles, n_standard: extra, m_standard: rows }
    }

    /// Rewrites `problem`, whose variables are subject to these bounds, as an
    /// equivalent problem over nonnegative variables.
    ///
    /// One-sided bounds become shifts or reflections, two-sided bounds gain a
    /// slack variable and an equality row, and free variables are split into a
    /// difference of nonnegative parts. The start point is carried over; any
    /// known solution is dropped because its bound multipliers are not
    /// expressible in the original space.
    pub fn standardize(&self, problem: &NlpProblem) -> Result<(NlpProblem, VariableMap), BoundsError> {
        if self.len() != problem.n {
            return Err(BoundsError::Dimension { lower: self.lower.len(), upper: self.upper.len(), n: problem.n });
        }
        let map = Arc::new(self.variable_map(problem.m));
        let (f, g, c, jac) = problem.parts();
        let m = problem.m;

        let to_x = {
            let map = map.clone();
            move |y: &DVector<f64>| map.recover(y)
        };
        let to_x = Arc::new(to_x);

        let objective = {
            let to_x = to_x.clone();
            Arc::new(move |y: &DVector<f64>| f(&to_x(y)))
        };
        let gradient = {
            let to_x = to_x.clone();
            let map = map.clone();
            Arc::new(move |y: &DVector<f64>| {
                let gx = g(&to_x(y));
                let mut gy = DVector::zeros(map.n_standard);
                for (i, role) in map.roles.iter().enumerate() {
                    match *role {
                        VariableRole::Shift { .. } | VariableRole::Box { .. } => gy[i] = gx[i],
                        VariableRole::Reflect { .. } => gy[i] = -gx[i],
                        VariableRole::Free { neg } => {
                            gy[i] = gx[i];
                            gy[neg] = -gx[i];
                        }
                    }
                }
                gy
            })
        };
        let constraints = {
            let to_x = to_x.clone();
            let map = map.clone();
            Arc::new(move |y: &DVector<f64>| {
                let mut out = DVector::zeros(map.m_standard);
                if m > 0 {
                    out.rows_mut(0, m).copy_from(&c(&to_x(y)));
                }
                for (i, role) in map.roles.iter().enumerate() {
                    if let VariableRole::Box { lower, upper, slack, row } = *role {
                        out[row] = y[i] + y[slack] - (upper - lower);
                    }
                }
                out
            })
        };
        let jacobian = {
            let map = map.clone();
            Arc::new(move |y: &DVector<f64>| {
                let mut out = DMatrix::zeros(map.m_standard, map.n_standard);
                if m > 0 {
                    let jx = jac(&to_x(y));
                    for (i, role) in map.roles.iter().enumerate() {
                        for r in 0..m {
                            match *role {
                                VariableRole::Shift { .. } | VariableRole::Box { .. } => out[(r, i)] = jx[(r, i)],
                                VariableRole::Reflect { .. } => out[(r, i)] = -jx[(r, i)],
                                VariableRole::Free { neg } => {
                                    out[(r, i)] = jx[(r, i)];
                                    out[(r, neg)] = -jx[(r, i)];
                                }
                            }
                        }
                    }
                }
                for (i, role) in map.roles.iter().enumerate() {
                    if let VariableRole::Box { slack, row, .. } = *role {
                        out[(row, i)] = 1.0;
                        out[(row, slack)] = 1.0;
                    }
                }
                out
            })
        };

        let x0 = map.embed(&problem.x0);
        let mut standard = NlpProblem::from_parts(
            problem.name.clone(),
            map.n_standard,
            map.m_standard,
            objective,
            gradient,
            constraints,
            jacobian,
        )
        .with_start(x0)
        .with_kind(problem.kind);
        standard.description = problem.description.clone();
        Ok((standard, Arc::try_unwrap(map).unwrap_or_else(|a| (*a).clone())))
    }
}

impl VariableMap {
    /// Original variables from nonnegative ones.
    pub fn recover(&self, y: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.roles.len(),
            self.roles.iter().enumerate().map(|(i, role)| match *role {
                VariableRole::Shift { lower } | VariableRole::Box { lower, .. } => lower + y[i],
                VariableRole::Reflect { upper } => upper - y[i],
                VariableRole::Free { neg } => y[i] - y[neg],
            }),
        )
    }

    /// Nonnegative variables representing `x`, after clamping `x` into its
    /// bounds.
    pub fn embed(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n_standard);
        for (i, role) in self.roles.iter().enumerate() {
            match *role {
                VariableRole::Shift { lower } => y[i] = (x[i] - lower).max(0.0),
                VariableRole::Reflect { upper } => y[i] = (upper - x[i]).max(0.0),
                VariableRole::Box { lower, upper, slack, .. } => {
                    let xi = x[i].clamp(lower, upper);
                    y[i] = xi - lower;
                    y[slack] = upper - xi;
                }
                VariableRole::Free { neg } => {
                    y[i] = x[i].max(0.0);
                    y[neg] = (-x[i]).max(0.0);
                }
            }
        }
        y
    }
}
