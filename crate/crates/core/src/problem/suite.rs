//! Built-in analytic test problems.
//!
//! Every regular problem documents a KKT point `(x*, y*, z*)`; the two
//! `inf_stat_*` problems start at an infeasible stationary point. Each problem
//! also declares global Lipschitz constants of its gradient and Jacobian over
//! the nonnegative orthant (a tiny positive value stands in for zero).

use nalgebra::{DMatrix, DVector};

use super::{add_slacks, BoundsSpec, InequalityProblem, NlpProblem, ProblemKind};
use crate::linalg::max_eigenvalue;

const LINEAR_GAMMA: f64 = 1e-4;

pub fn builtin_suite() -> Vec<NlpProblem> {
    vec![
        eq_qp_4(),
        eq_qp_20(),
        simplex_projection(),
        inf_stat_1d(),
        inf_stat_3d(),
        degenerate_far(),
        slack_ineq(),
        hs6(),
        sphere_max(),
        circle_linear(),
        bounded_box(),
        exp_weighted(),
    ]
}

pub fn problem_names() -> Vec<String> {
    builtin_suite().into_iter().map(|p| p.name).collect()
}

pub fn find_problem(name: &str) -> Option<NlpProblem> {
    builtin_suite().into_iter().find(|p| p.name == name)
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

/// `0.5 x'Qx + q'x` subject to `Ax = b`, built backwards from a chosen
/// interior KKT point so that `(x*, y*, 0)` is exact by construction.
fn equality_qp(name: &str, q_mat: DMatrix<f64>, a: DMatrix<f64>, x_star: DVector<f64>, y_star: DVector<f64>) -> NlpProblem {
    let n = q_mat.nrows();
    let m = a.nrows();
    let q_lin = -(&q_mat * &x_star) - a.transpose() * &y_star;
    let b = &a * &x_star;
    let l = max_eigenvalue(&q_mat);
    let (q1, q2, ql1, ql2) = (q_mat.clone(), q_mat, q_lin.clone(), q_lin);
    let (a1, a2) = (a.clone(), a);
    NlpProblem::new(
        name,
        n,
        m,
        move |x| 0.5 * x.dot(&(&q1 * x)) + ql1.dot(x),
        move |x| &q2 * x + &ql2,
        move |x| &a1 * x - &b,
        move |_| a2.clone(),
    )
    .with_solution(x_star, y_star, DVector::zeros(n))
    .with_lipschitz(l, LINEAR_GAMMA)
}

fn eq_qp_4() -> NlpProblem {
    let q = DMatrix::from_row_slice(
        4,
        4,
        &[4.0, 1.0, 0.0, 0.0, 1.0, 3.0, 0.0, 0.5, 0.0, 0.0, 2.0, 0.0, 0.0, 0.5, 0.0, 5.0],
    );
    let a = DMatrix::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 1.0, -1.0, 2.0, 0.0]);
    equality_qp("eq_qp_4", q, a, v(&[1.0, 0.5, 0.75, 0.25]), v(&[0.5, -0.3]))
        .with_start(v(&[2.0, 2.0, 0.0, 0.0]))
        .with_description("strictly convex quadratic, two linear equalities, interior solution")
}

fn eq_qp_20() -> NlpProblem {
    let (n, m) = (20, 10);
    let mfac = DMatrix::from_fn(n, n, |i, j| ((7 * i + 3 * j) as f64).sin());
    let q = mfac.transpose() * &mfac / n as f64 + DMatrix::identity(n, n);
    let a = DMatrix::from_fn(m, n, |i, j| if i == j { 2.0 } else { ((i * n + j) as f64 * 0.37).cos() * 0.5 });
    let x_star = DVector::from_fn(n, |i, _| 0.5 + 0.05 * i as f64);
    let y_star = DVector::from_fn(m, |i, _| (i as f64 + 1.0).sin());
    equality_qp("eq_qp_20", q, a, x_star, y_star)
        .with_start(DVector::from_element(n, 1.0))
        .with_description("20-variable convex quadratic with 10 dense linear equalities")
}

fn simplex_projection() -> NlpProblem {
    let a = v(&[1.0, -1.0, 0.5]);
    let a2 = a.clone();
    NlpProblem::new(
        "simplex_projection",
        3,
        1,
        move |x| 0.5 * (x - &a).norm_squared(),
        move |x| x - &a2,
        |x| v(&[x.sum() - 1.0]),
        |_| DMatrix::from_element(1, 3, 1.0),
    )
    .with_start(v(&[1.0, 1.0, 1.0]))
    .with_solution(v(&[0.75, 0.0, 0.25]), v(&[0.25]), v(&[0.0, 1.25, 0.0]))
    .with_lipschitz(1.0, LINEAR_GAMMA)
    .with_description("Euclidean projection onto the unit simplex, bound active at x2")
}

fn inf_stat_1d() -> NlpProblem {
    NlpProblem::new(
        "inf_stat_1d",
        1,
        1,
        |x| 0.5 * x[0] * x[0],
        |x| x.clone(),
        |x| v(&[x[0] + 1.0]),
        |_| DMatrix::from_element(1, 1, 1.0),
    )
    .with_start(v(&[0.0]))
    .with_lipschitz(1.0, LINEAR_GAMMA)
    .with_kind(ProblemKind::InfeasibleStationary)
    .with_description("c(x) = x + 1 has no nonnegative root; x = 0 is infeasible stationary")
}

fn inf_stat_3d() -> NlpProblem {
    NlpProblem::new(
        "inf_stat_3d",
        3,
        2,
        |x| 0.5 * x.norm_squared(),
        |x| x.clone(),
        |x| v(&[x[0] + x[1] + 1.0, x[1] + x[2] + 2.0]),
        |_| DMatrix::from_row_slice(2, 3, &[1.0, 1.0, 0.0, 0.0, 1.0, 1.0]),
    )
    .with_start(DVector::zeros(3))
    .with_lipschitz(1.0, LINEAR_GAMMA)
    .with_kind(ProblemKind::InfeasibleStationary)
    .with_description("two positive-offset linear equalities; the origin is infeasible stationary")
}

fn degenerate_far() -> NlpProblem {
    NlpProblem::new(
        "degenerate_far",
        2,
        1,
        |x| 0.5 * (x[0] - 1.0).powi(2) + 0.5 * x[1] * x[1],
        |x| v(&[x[0] - 1.0, x[1]]),
        |x| v(&[x[0] * x[0] + x[1] - 1.0]),
        |x| DMatrix::from_row_slice(1, 2, &[2.0 * x[0], 1.0]),
    )
    .with_start(v(&[5.0, 5.0]))
    .with_solution(v(&[1.0, 0.0]), v(&[0.0]), v(&[0.0, 0.0]))
    .with_lipschitz(1.0, 2.0)
    .with_description("weakly active bound (x2 = 0, z2 = 0) started with ||c|| = 29")
}

fn slack_ineq() -> NlpProblem {
    let base = NlpProblem::new(
        "slack_ineq",
        2,
        0,
        |x| 0.5 * (x[0] - 2.0).powi(2) + 0.5 * (x[1] - 1.0).powi(2),
        |x| v(&[x[0] - 2.0, x[1] - 1.0]),
        |_| DVector::zeros(0),
        |_| DMatrix::zeros(0, 2),
    )
    .with_start(v(&[0.0, 0.0]))
    .with_solution(v(&[1.5, 0.5]), DVector::zeros(0), DVector::zeros(2))
    .with_lipschitz(1.0, LINEAR_GAMMA)
    .with_description("x1 + x2 <= 2 rewritten with a slack variable");
    add_slacks(
        InequalityProblem::new(base, 1, |x| v(&[x[0] + x[1] - 2.0]), |_| DMatrix::from_element(1, 2, 1.0))
            .with_multipliers(v(&[0.5])),
    )
}

/// Hock-Schittkowski problem 6.
fn hs6() -> NlpProblem {
    NlpProblem::new(
        "hs6",
        2,
        1,
        |x| (1.0 - x[0]).powi(2),
        |x| v(&[-2.0 * (1.0 - x[0]), 0.0]),
        |x| v(&[10.0 * (x[1] - x[0] * x[0])]),
        |x| DMatrix::from_row_slice(1, 2, &[-20.0 * x[0], 10.0]),
    )
    .with_start(v(&[0.5, 1.0]))
    .with_solution(v(&[1.0, 1.0]), v(&[0.0]), v(&[0.0, 0.0]))
    .with_lipschitz(2.0, 20.0)
    .with_description("Hock-Schittkowski 6, curved equality")
}

fn sphere_max() -> NlpProblem {
    NlpProblem::new(
        "sphere_max",
        3,
        1,
        |x| -x.sum(),
        |_| DVector::from_element(3, -1.0),
        |x| v(&[x.norm_squared() - 3.0]),
        |x| DMatrix::from_row_slice(1, x.len(), (2.0 * x).as_slice()),
    )
    .with_start(v(&[0.5, 2.0, 0.1]))
    .with_solution(v(&[1.0, 1.0, 1.0]), v(&[0.5]), DVector::zeros(3))
    .with_lipschitz(1e-4, 2.0)
    .with_description("maximize the coordinate sum on the sphere of radius sqrt(3)")
}

fn circle_linear() -> NlpProblem {
    let r2 = 2.0_f64.sqrt();
    NlpProblem::new(
        "circle_linear",
        2,
        1,
        |x| x[0] + 2.0 * x[1],
        |_| v(&[1.0, 2.0]),
        |x| v(&[x.norm_squared() - 2.0]),
        |x| DMatrix::from_row_slice(1, x.len(), (2.0 * x).as_slice()),
    )
    .with_start(v(&[2.0, 0.5]))
    .with_solution(v(&[r2, 0.0]), v(&[-1.0 / (2.0 * r2)]), v(&[0.0, 2.0]))
    .with_lipschitz(1e-4, 2.0)
    .with_description("linear objective on a circle arc, bound active at x2 = 0")
}

/// `(x1 - 3)^2 + (x2 + 1)^2` s.t. `x1 - x2 = 1`, `-2 <= x1 <= 1`, `x2 >= -1`,
/// posed through [`BoundsSpec::standardize`]. Standard variables are
/// `(x1 + 2, x2 + 1, 1 - x1)`.
fn bounded_box() -> NlpProblem {
    let original = NlpProblem::new(
        "bounded_box",
        2,
        1,
        |x| (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2),
        |x| v(&[2.0 * (x[0] - 3.0), 2.0 * (x[1] + 1.0)]),
        |x| v(&[x[0] - x[1] - 1.0]),
        |_| DMatrix::from_row_slice(1, 2, &[1.0, -1.0]),
    )
    .with_start(v(&[0.0, 0.0]))
    .with_description("general bounds: a two-sided box on x1 and a shifted lower bound on x2");
    let bounds = BoundsSpec::new(vec![-2.0, -1.0], vec![1.0, f64::INFINITY]).expect("valid bounds");
    let (standard, _) = bounds.standardize(&original).expect("dimensions match");
    standard
        .with_solution(v(&[3.0, 1.0, 0.0]), v(&[2.0, 2.0]), v(&[0.0, 0.0, 2.0]))
        .with_lipschitz(2.0, LINEAR_GAMMA)
}

/// `sum_i w_i exp(-x_i)` on a hyperplane; the weights put three coordinates
/// at `(0.5, 1, 2)` with multiplier 0.2 and hold the fourth at its bound.
fn exp_weighted() -> NlpProblem {
    let y_star = 0.2;
    let interior = [0.5, 1.0, 2.0];
    let mut w: Vec<f64> = interior.iter().map(|x: &f64| y_star * x.exp()).collect();
    w.push(0.1);
    let (wf, wg) = (w.clone(), w.clone());
    let l = w.iter().cloned().fold(0.0, f64::max);
    NlpProblem::new(
        "exp_weighted",
        4,
        1,
        move |x| x.iter().zip(&wf).map(|(xi, wi)| wi * (-xi).exp()).sum(),
        move |x| DVector::from_fn(4, |i, _| -wg[i] * (-x[i]).exp()),
        |x| v(&[x.sum() - 3.5]),
        |_| DMatrix::from_element(1, 4, 1.0),
    )
    .with_start(DVector::from_element(4, 1.0))
    .with_solution(v(&[0.5, 1.0, 2.0, 0.0]), v(&[y_star]), v(&[0.0, 0.0, 0.0, y_star - w[3]]))
    .with_lipschitz(l, LINEAR_GAMMA)
    .with_description("weighted exponential objective on a hyperplane, one active bound")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::derivative_check;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn suite_meets_size_limits() {
        let suite = builtin_suite();
        assert!(suite.len() >= 10);
        for p in &suite {
            assert!(p.n <= 20 && p.m <= 10 && p.m <= p.n, "{}", p.name);
            assert!(p.x0.iter().all(|x| *x >= 0.0), "{}", p.name);
            assert!(p.lipschitz.is_some(), "{}", p.name);
            if p.kind == ProblemKind::Regular {
                assert!(p.known_solution.is_some(), "{}", p.name);
            }
        }
    }

    #[test]
    fn names_are_unique() {
        let mut names = problem_names();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), builtin_suite().len());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for p in builtin_suite() {
            for _ in 0..20 {
                let x = DVector::from_fn(p.n, |_, _| rng.random_range(0.0..5.0));
                let err = derivative_check(&p, &x);
                assert!(err < 1e-5, "{}: relative derivative error {err:e}", p.name);
            }
        }
    }

    #[test]
    fn inf_stat_1d_start_satisfies_infeasible_stationarity() {
        let p = find_problem("inf_stat_1d").unwrap();
        let x = &p.x0;
        let c = p.constraints(x);
        let grad_feas = p.jacobian(x).transpose() * &c;
        assert_eq!(x[0], 0.0);
        assert_eq!(c[0], 1.0);
        // 0 <= x  _|_  grad c * c = 1 >= 0
        assert_eq!(grad_feas[0], 1.0);
        assert_eq!(x[0] * grad_feas[0], 0.0);
    }

    #[test]
    fn equality_qp_solution_from_one_linear_solve() {
        for name in ["eq_qp_4", "eq_qp_20"] {
            let p = find_problem(name).unwrap();
            let (n, m) = (p.n, p.m);
            // recover Q, q, A, b from the closures at the origin and unit vectors
            let zero = DVector::zeros(n);
            let q_lin = p.gradient(&zero);
            let q = DMatrix::from_fn(n, n, |i, j| {
                let mut e = DVector::zeros(n);
                e[j] = 1.0;
                p.gradient(&e)[i] - q_lin[i]
            });
            let a = p.jacobian(&zero);
            let b = -p.constraints(&zero);
            let mut kkt = DMatrix::zeros(n + m, n + m);
            kkt.view_mut((0, 0), (n, n)).copy_from(&q);
            kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
            kkt.view_mut((n, 0), (m, n)).copy_from(&a);
            let mut rhs = DVector::zeros(n + m);
            rhs.rows_mut(0, n).copy_from(&(-q_lin));
            rhs.rows_mut(n, m).copy_from(&b);
            let sol = kkt.lu().solve(&rhs).unwrap();
            let known = p.known_solution.unwrap();
            assert!((sol.rows(0, n) - &known.x).amax() < 1e-10, "{name}");
            assert!((sol.rows(n, m) - &known.y).amax() < 1e-10, "{name}");
            assert!(known.x.iter().all(|x| *x > 0.0));
        }
    }
}
