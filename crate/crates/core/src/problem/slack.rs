use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::{KnownSolution, MatrixFn, NlpProblem, VectorFn};

/// A problem in the standard form plus inequality constraints `c_I(x) <= 0`.
#[derive(Clone)]
pub struct InequalityProblem {
    pub base: NlpProblem,
    pub m_ineq: usize,
    pub ineq: VectorFn,
    pub ineq_jacobian: MatrixFn,
    /// Multipliers `lambda >= 0` of the inequalities at `base.known_solution`.
    pub ineq_multipliers: Option<DVector<f64>>,
}

impl InequalityProblem {
    pub fn new(
        base: NlpProblem,
        m_ineq: usize,
        ineq: impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        ineq_jacobian: impl Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        InequalityProblem {
            base,
            m_ineq,
            ineq: Arc::new(ineq),
            ineq_jacobian: Arc::new(ineq_jacobian),
            ineq_multipliers: None,
        }
    }

    pub fn with_multipliers(mut self, lambda: DVector<f64>) -> Self {
        assert_eq!(lambda.len(), self.m_ineq);
        self.ineq_multipliers = Some(lambda);
        self
    }
}

/// Rewrites `c_I(x) <= 0` as `c_I(x) + s = 0` with slack variables `s >= 0`
/// appended after the original variables and the new rows appended after the
/// original equalities.
///
/// The start point gets slacks `max(-c_I(x0), 0)`. A known solution is
/// carried over when the inequality multipliers are supplied.
pub fn add_slacks(problem: InequalityProblem) -> NlpProblem {
    let InequalityProblem { base, m_ineq, ineq, ineq_jacobian, ineq_multipliers } = problem;
    if m_ineq == 0 {
        return base;
    }
    let (n, m) = (base.n, base.m);
    let (n2, m2) = (n + m_ineq, m + m_ineq);
    let (f, g, c, jac) = base.parts();

    let objective = Arc::new(move |xs: &DVector<f64>| f(&xs.rows(0, n).into_owned()));
    let gradient = Arc::new(move |xs: &DVector<f64>| {
        let mut out = DVector::zeros(n2);
        out.rows_mut(0, n).copy_from(&g(&xs.rows(0, n).into_owned()));
        out
    });
    let constraints = {
        let ineq = ineq.clone();
        Arc::new(move |xs: &DVector<f64>| {
            let x = xs.rows(0, n).into_owned();
            let mut out = DVector::zeros(m2);
            if m > 0 {
                out.rows_mut(0, m).copy_from(&c(&x));
            }
            let ci = ineq(&x);
            for i in 0..m_ineq {
                out[m + i] = ci[i] + xs[n + i];
            }
            out
        })
    };
    let jacobian = Arc::new(move |xs: &DVector<f64>| {
        let x = xs.rows(0, n).into_owned();
        let mut out = DMatrix::zeros(m2, n2);
        if m > 0 {
            out.view_mut((0, 0), (m, n)).copy_from(&jac(&x));
        }
        out.view_mut((m, 0), (m_ineq, n)).copy_from(&ineq_jacobian(&x));
        for i in 0..m_ineq {
            out[(m + i, n + i)] = 1.0;
        }
        out
    });

    let mut x0 = DVector::zeros(n2);
    x0.rows_mut(0, n).copy_from(&base.x0);
    let c0 = ineq(&base.x0);
    for i in 0..m_ineq {
        x0[n + i] = (-c0[i]).max(0.0);
    }

    let mut out = NlpProblem::from_parts(base.name.clone(), n2, m2, objective, gradient, constraints, jacobian)
        .with_start(x0)
        .with_kind(base.kind);
    out.description = base.description.clone();
    out.lipschitz = base.lipschitz;

    if let (Some(sol), Some(lambda)) = (&base.known_solution, &ineq_multipliers) {
        let ci = ineq(&sol.x);
        let mut x = DVector::zeros(n2);
        let mut y = DVector::zeros(m2);
        let mut z = DVector::zeros(n2);
        x.rows_mut(0, n).copy_from(&sol.x);
        y.rows_mut(0, m).copy_from(&sol.y);
        z.rows_mut(0, n).copy_from(&sol.z);
        for i in 0..m_ineq {
            x[n + i] = (-ci[i]).max(0.0);
            y[m + i] = lambda[i];
            z[n + i] = lambda[i];
        }
        out.known_solution = Some(KnownSolution { x, y, z });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_var() -> InequalityProblem {
        let base = NlpProblem::new(
            "x_le_2",
            1,
            0,
            |x| 0.5 * (x[0] - 3.0).powi(2),
            |x| DVector::from_vec(vec![x[0] - 3.0]),
            |_| DVector::zeros(0),
            |_| DMatrix::zeros(0, 1),
        )
        .with_start(DVector::from_vec(vec![1.0]))
        .with_solution(DVector::from_vec(vec![2.0]), DVector::zeros(0), DVector::zeros(1));
        InequalityProblem::new(
            base,
            1,
            |x| DVector::from_vec(vec![x[0] - 2.0]),
            |_| DMatrix::from_row_slice(1, 1, &[1.0]),
        )
        .with_multipliers(DVector::from_vec(vec![1.0]))
    }

    #[test]
    fn slack_problem_shape() {
        let p = add_slacks(one_var());
        assert_eq!((p.n, p.m), (2, 1));
        let x = DVector::from_vec(vec![0.5, 0.25]);
        assert_eq!(p.constraints(&x)[0], 0.5 - 2.0 + 0.25);
        assert_eq!(p.jacobian(&x), DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    }

    #[test]
    fn feasible_start_maps_to_zero_violation() {
        let p = add_slacks(one_var());
        assert_eq!(p.x0.as_slice(), &[1.0, 1.0]);
        assert_eq!(p.constraints(&p.x0)[0], 0.0);
    }

    #[test]
    fn known_solution_is_carried() {
        let p = add_slacks(one_var());
        let sol = p.known_solution.unwrap();
        assert_eq!(sol.x.as_slice(), &[2.0, 0.0]);
        assert_eq!(sol.y.as_slice(), &[1.0]);
        assert_eq!(sol.z.as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn no_inequalities_returns_base() {
        let mut ip = one_var();
        ip.m_ineq = 0;
        let p = add_slacks(ip);
        assert_eq!((p.n, p.m), (1, 0));
    }
}
