//! Exhaustive enumeration of active sets, used as an independent reference
//! for the active-set solver.

use nalgebra::{DMatrix, DVector};

use super::{scaled_residual, ConvexQp, QpError, QpSolution, QpStatus};
use crate::linalg::independent_rows;

pub const BRUTE_FORCE_MAX_INEQUALITIES: usize = 12;

const ACCEPT_TOL: f64 = 1e-9;

/// Solves every equality-constrained problem obtained by fixing a subset of the
/// inequalities at equality and keeps the best primal and dual feasible one.
pub fn brute_force_qp(qp: &ConvexQp) -> Result<QpSolution, QpError> {
    let (p, r, s) = (qp.dim(), qp.n_eq(), qp.n_in());
    if s > BRUTE_FORCE_MAX_INEQUALITIES {
        return Err(QpError::DimensionTooLarge { s, limit: BRUTE_FORCE_MAX_INEQUALITIES });
    }
    let eq_rows: Vec<DVector<f64>> = (0..r).map(|i| qp.a_eq.row(i).transpose()).collect();
    let mut eq_basis = Vec::new();
    let eq_idx = independent_rows(&eq_rows, &mut eq_basis, 1e-10);
    let in_rows: Vec<DVector<f64>> = (0..s).map(|i| qp.a_in.row(i).transpose()).collect();

    let mut best: Option<(f64, QpSolution)> = None;
    for mask in 0u32..(1u32 << s) {
        let subset: Vec<usize> = (0..s).filter(|i| mask & (1 << i) != 0).collect();
        let rows: Vec<DVector<f64>> = subset.iter().map(|&i| in_rows[i].clone()).collect();
        if independent_rows(&rows, &mut eq_basis.clone(), 1e-10).len() != subset.len() {
            continue;
        }
        let Some((z, y, lambda)) = solve_equality_kkt(qp, &eq_idx, &subset) else {
            continue;
        };
        let scale = qp.data_scale(&z);
        if qp.infeasibility(&z) > ACCEPT_TOL * scale || lambda.iter().any(|l| *l < -ACCEPT_TOL * scale) {
            continue;
        }
        let obj = qp.objective(&z);
        if best.as_ref().is_some_and(|(b, _)| obj >= *b) {
            continue;
        }
        let mut y_eq = DVector::zeros(r);
        for (k, &i) in eq_idx.iter().enumerate() {
            y_eq[i] = y[k];
        }
        let mut z_in = DVector::zeros(s);
        for (k, &i) in subset.iter().enumerate() {
            z_in[i] = lambda[k];
        }
        let mut sol = QpSolution {
            z,
            y_eq,
            z_in,
            active_set: subset,
            status: QpStatus::Optimal,
            kkt_residual: 0.0,
            iterations: 0,
        };
        sol.kkt_residual = scaled_residual(qp, &sol);
        best = Some((obj, sol));
    }
    Ok(best.map(|(_, sol)| sol).unwrap_or_else(|| QpSolution {
        z: DVector::zeros(p),
        y_eq: DVector::zeros(r),
        z_in: DVector::zeros(s),
        active_set: Vec::new(),
        status: QpStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        iterations: 0,
    }))
}

fn solve_equality_kkt(qp: &ConvexQp, eq_idx: &[usize], subset: &[usize]) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let p = qp.dim();
    let (ne, nw) = (eq_idx.len(), subset.len());
    let size = p + ne + nw;
    let mut kkt = DMatrix::zeros(size, size);
    kkt.view_mut((0, 0), (p, p)).copy_from(&qp.q_mat);
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, p).copy_from(&(-&qp.q));
    for (k, &i) in eq_idx.iter().enumerate() {
        for j in 0..p {
            kkt[(p + k, j)] = qp.a_eq[(i, j)];
            kkt[(j, p + k)] = qp.a_eq[(i, j)];
        }
        rhs[p + k] = qp.b_eq[i];
    }
    for (k, &i) in subset.iter().enumerate() {
        for j in 0..p {
            kkt[(p + ne + k, j)] = qp.a_in[(i, j)];
            kkt[(j, p + ne + k)] = -qp.a_in[(i, j)];
        }
        rhs[p + ne + k] = qp.b_in[i];
    }
    let sol = kkt.full_piv_lu().solve(&rhs)?;
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, p).into_owned(), sol.rows(p, ne).into_owned(), sol.rows(p + ne, nw).into_owned()))
}
