//! Primal active-set method with a dense LU factorization of the full KKT
//! matrix for each working set.

use nalgebra::{DMatrix, DVector};

use super::{scaled_residual, ConvexQp, QpSolution, QpStatus};
use crate::linalg::independent_rows;

/// Regularization weight of the phase-1 auxiliary problem.
const PHASE1_DELTA: f64 = 1e-8;
const RATIO_TIE_TOL: f64 = 1e-12;
const DEGENERATE_STEP: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActiveSetOptions {
    pub tol: f64,
    /// Working-set changes allowed; `None` means `50 (p + s)`.
    pub max_iter: Option<usize>,
}

impl Default for ActiveSetOptions {
    fn default() -> Self {
        ActiveSetOptions { tol: 1e-9, max_iter: None }
    }
}

pub fn solve_qp(qp: &ConvexQp, tol: f64, max_iter: usize) -> QpSolution {
    solve_qp_warm(qp, None, &[], &ActiveSetOptions { tol, max_iter: Some(max_iter) })
}

/// Solves `qp` starting from `start` (if feasible) with the constraints listed
/// in `hint` that are active there as the initial working set.
pub fn solve_qp_warm(qp: &ConvexQp, start: Option<&DVector<f64>>, hint: &[usize], opts: &ActiveSetOptions) -> QpSolution {
    let (p, s) = (qp.dim(), qp.n_in());
    let tol = opts.tol;
    let max_iter = opts.max_iter.unwrap_or(50 * (p + s));

    let eq_rows: Vec<DVector<f64>> = (0..qp.n_eq()).map(|i| qp.a_eq.row(i).transpose()).collect();
    let mut eq_basis = Vec::new();
    let eq_idx = independent_rows(&eq_rows, &mut eq_basis, RANK_TOL);

    let (z, phase1_iters) = match start {
        Some(z0) if z0.len() == p && qp.infeasibility(z0) <= tol * qp.data_scale(z0) => (z0.clone(), 0),
        _ => match phase_one(qp, &eq_idx, start, tol) {
            Some(found) => found,
            None => return infeasible(qp, start),
        },
    };
    if (&qp.a_eq * &z - &qp.b_eq).amax() > tol * qp.data_scale(&z) {
        // dependent equality rows with inconsistent right-hand sides
        return infeasible(qp, Some(&z));
    }

    let mut candidates: Vec<usize> = Vec::new();
    for &i in hint {
        if i < s && !candidates.contains(&i) {
            let slack = qp.a_in.row(i).dot(&z.transpose()) - qp.b_in[i];
            if slack.abs() <= tol * qp.data_scale(&z) {
                candidates.push(i);
            }
        }
    }
    let cand_rows: Vec<DVector<f64>> = candidates.iter().map(|&i| qp.a_in.row(i).transpose()).collect();
    let working: Vec<usize> = independent_rows(&cand_rows, &mut eq_basis.clone(), RANK_TOL)
        .into_iter()
        .map(|k| candidates[k])
        .collect();

    let out = iterate(qp, &eq_idx, z, working, tol, max_iter.saturating_sub(phase1_iters));
    assemble(qp, &eq_idx, out, phase1_iters)
}

fn infeasible(qp: &ConvexQp, z: Option<&DVector<f64>>) -> QpSolution {
    let z = z.filter(|z| z.len() == qp.dim()).cloned().unwrap_or_else(|| DVector::zeros(qp.dim()));
    QpSolution {
        z,
        y_eq: DVector::zeros(qp.n_eq()),
        z_in: DVector::zeros(qp.n_in()),
        active_set: Vec::new(),
        status: QpStatus::Infeasible,
        kkt_residual: f64::INFINITY,
        iterations: 0,
    }
}

/// Finds a feasible point by projecting onto the equalities and then
/// minimizing the total inequality violation `1't` with a tiny proximal term.
fn phase_one(qp: &ConvexQp, eq_idx: &[usize], start: Option<&DVector<f64>>, tol: f64) -> Option<(DVector<f64>, usize)> {
    let (p, s) = (qp.dim(), qp.n_in());
    let base = start.filter(|z| z.len() == p).cloned().unwrap_or_else(|| DVector::zeros(p));
    let r = eq_idx.len();
    let a_e = DMatrix::from_fn(r, p, |i, j| qp.a_eq[(eq_idx[i], j)]);
    let b_e = DVector::from_fn(r, |i, _| qp.b_eq[eq_idx[i]]);
    let z0 = if r == 0 {
        base
    } else {
        let gram = &a_e * a_e.transpose();
        let resid = &a_e * &base - &b_e;
        let corr = gram.lu().solve(&resid)?;
        &base - a_e.transpose() * corr
    };
    if (&qp.a_eq * &z0 - &qp.b_eq).amax() > tol * qp.data_scale(&z0) {
        return None;
    }
    if qp.infeasibility(&z0) <= tol * qp.data_scale(&z0) {
        return Some((z0, 0));
    }

    let dim = p + s;
    let mut q_aux = DMatrix::zeros(dim, dim);
    q_aux.fill_diagonal(PHASE1_DELTA);
    let mut q_lin = DVector::zeros(dim);
    q_lin.rows_mut(0, p).copy_from(&(-PHASE1_DELTA * &z0));
    q_lin.rows_mut(p, s).fill(1.0);
    let mut a_eq = DMatrix::zeros(r, dim);
    a_eq.view_mut((0, 0), (r, p)).copy_from(&a_e);
    let mut a_in = DMatrix::zeros(2 * s, dim);
    a_in.view_mut((0, 0), (s, p)).copy_from(&qp.a_in);
    for i in 0..s {
        a_in[(i, p + i)] = 1.0;
        a_in[(s + i, p + i)] = 1.0;
    }
    let mut b_in = DVector::zeros(2 * s);
    b_in.rows_mut(0, s).copy_from(&qp.b_in);
    let aux = ConvexQp { q_mat: q_aux, q: q_lin, a_eq, b_eq: b_e, a_in, b_in };

    let viol = &qp.b_in - &qp.a_in * &z0;
    let mut start_aux = DVector::zeros(dim);
    start_aux.rows_mut(0, p).copy_from(&z0);
    for i in 0..s {
        start_aux[p + i] = viol[i].max(0.0);
    }
    let all_eq: Vec<usize> = (0..r).collect();
    let out = iterate(&aux, &all_eq, start_aux, Vec::new(), tol, 50 * (dim + 2 * s));
    let z = out.z.rows(0, p).into_owned();
    if qp.infeasibility(&z) <= tol * qp.data_scale(&z) {
        Some((z, out.changes))
    } else {
        None
    }
}

struct IterateOutcome {
    z: DVector<f64>,
    y: DVector<f64>,
    lambda: DVector<f64>,
    working: Vec<usize>,
    status: QpStatus,
    changes: usize,
}

/// Newton step onto the minimizer over the current working set, with the
/// multipliers of that minimizer. Residuals of the working constraints are
/// folded into the right-hand side so that drift is removed.
fn working_set_step(
    qp: &ConvexQp,
    eq_idx: &[usize],
    working: &[usize],
    z: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>, DVector<f64>)> {
    let p = qp.dim();
    let (ne, nw) = (eq_idx.len(), working.len());
    let size = p + ne + nw;
    let mut kkt = DMatrix::zeros(size, size);
    kkt.view_mut((0, 0), (p, p)).copy_from(&qp.q_mat);
    let mut rhs = DVector::zeros(size);
    rhs.rows_mut(0, p).copy_from(&(-(&qp.q_mat * z + &qp.q)));
    for (k, &i) in eq_idx.iter().enumerate() {
        let row = qp.a_eq.row(i);
        for j in 0..p {
            kkt[(p + k, j)] = row[j];
            kkt[(j, p + k)] = row[j];
        }
        rhs[p + k] = qp.b_eq[i] - row.dot(&z.transpose());
    }
    for (k, &i) in working.iter().enumerate() {
        let row = qp.a_in.row(i);
        for j in 0..p {
            kkt[(p + ne + k, j)] = row[j];
            kkt[(j, p + ne + k)] = -row[j];
        }
        rhs[p + ne + k] = qp.b_in[i] - row.dot(&z.transpose());
    }
    let lu = kkt.clone().lu();
    let mut sol = lu.solve(&rhs)?;
    // one step of iterative refinement
    let resid = &rhs - &kkt * &sol;
    if let Some(corr) = lu.solve(&resid) {
        sol += corr;
    }
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    Some((
        sol.rows(0, p).into_owned(),
        sol.rows(p, ne).into_owned(),
        sol.rows(p + ne, nw).into_owned(),
    ))
}

fn iterate(
    qp: &ConvexQp,
    eq_idx: &[usize],
    mut z: DVector<f64>,
    mut working: Vec<usize>,
    tol: f64,
    max_iter: usize,
) -> IterateOutcome {
    let (p, s) = (qp.dim(), qp.n_in());
    let mut changes = 0usize;
    let mut degenerate_run = 0usize;
    let mut bland = false;
    let mut after_full_step = false;
    let mut last = (DVector::zeros(eq_idx.len()), DVector::zeros(working.len()));

    loop {
        let Some((step, y, lambda)) = working_set_step(qp, eq_idx, &working, &z) else {
            log::warn!("singular working-set KKT matrix with {} active constraints", working.len());
            return IterateOutcome { z, y: last.0, lambda: last.1, working, status: QpStatus::IterationLimit, changes };
        };
        let step_norm = step.amax();
        if after_full_step || step_norm <= 1e-12 * z.amax().max(1.0) {
            z += &step;
            after_full_step = false;
            let leaving = lambda
                .iter()
                .enumerate()
                .filter(|(_, l)| **l < -tol)
                .min_by(|a, b| {
                    if bland {
                        working[a.0].cmp(&working[b.0])
                    } else {
                        a.1.total_cmp(b.1).then(working[a.0].cmp(&working[b.0]))
                    }
                })
                .map(|(k, _)| k);
            match leaving {
                None => {
                    return IterateOutcome { z, y, lambda, working, status: QpStatus::Optimal, changes };
                }
                Some(k) => {
                    if changes >= max_iter {
                        return IterateOutcome { z, y, lambda, working, status: QpStatus::IterationLimit, changes };
                    }
                    working.remove(k);
                    changes += 1;
                    last = (y, DVector::zeros(working.len()));
                    continue;
                }
            }
        }

        // ratio test over constraints outside the working set
        let mut best: Option<(usize, f64, f64)> = None;
        let p_scale = step_norm;
        for i in 0..s {
            if working.contains(&i) {
                continue;
            }
            let row = qp.a_in.row(i);
            let ap = row.dot(&step.transpose());
            if ap >= -1e-13 * row.amax() * p_scale {
                continue;
            }
            let slack = (row.dot(&z.transpose()) - qp.b_in[i]).max(0.0);
            let alpha = slack / -ap;
            best = match best {
                None => Some((i, alpha, ap)),
                Some((bi, ba, bap)) => {
                    let replace = if alpha < ba - RATIO_TIE_TOL {
                        true
                    } else if alpha <= ba + RATIO_TIE_TOL {
                        !bland && ap < bap
                    } else {
                        false
                    };
                    if replace {
                        Some((i, alpha, ap))
                    } else {
                        Some((bi, ba, bap))
                    }
                }
            };
        }
        last = (y, lambda);
        match best {
            Some((i, alpha, _)) if alpha < 1.0 => {
                if changes >= max_iter {
                    return IterateOutcome { z, y: last.0, lambda: last.1, working, status: QpStatus::IterationLimit, changes };
                }
                z.axpy(alpha, &step, 1.0);
                working.push(i);
                changes += 1;
                last.1 = DVector::zeros(working.len());
                if alpha <= DEGENERATE_STEP {
                    degenerate_run += 1;
                    if degenerate_run >= p {
                        bland = true;
                    }
                } else {
                    degenerate_run = 0;
                    bland = false;
                }
            }
            _ => {
                z += &step;
                after_full_step = true;
            }
        }
    }
}

fn assemble(qp: &ConvexQp, eq_idx: &[usize], out: IterateOutcome, phase1_iters: usize) -> QpSolution {
    let mut y_eq = DVector::zeros(qp.n_eq());
    for (k, &i) in eq_idx.iter().enumerate() {
        if k < out.y.len() {
            y_eq[i] = out.y[k];
        }
    }
    let mut z_in = DVector::zeros(qp.n_in());
    for (k, &i) in out.working.iter().enumerate() {
        if k < out.lambda.len() {
            z_in[i] = out.lambda[k];
        }
    }
    let mut active_set = out.working.clone();
    active_set.sort_unstable();
    let mut sol = QpSolution {
        z: out.z,
        y_eq,
        z_in,
        active_set,
        status: out.status,
        kkt_residual: 0.0,
        iterations: out.changes + phase1_iters,
    };
    sol.kkt_residual = scaled_residual(qp, &sol);
    sol
}
