//! Small dense helpers shared by the subproblem and step-size code.

use nalgebra::{DMatrix, DVector};

pub fn norm_inf(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// `||c||_2 - ||c + jd||_2`, evaluated without cancellation.
///
/// The difference of two nearly equal norms loses all significant digits when
/// `jd` is small relative to `c`; the rationalized form keeps them.
pub fn linearized_gain(c: &DVector<f64>, jd: &DVector<f64>) -> f64 {
    let c_norm = c.norm();
    let shifted = c + jd;
    let shifted_norm = shifted.norm();
    let denom = c_norm + shifted_norm;
    if denom == 0.0 {
        return 0.0;
    }
    -(2.0 * c.dot(jd) + jd.norm_squared()) / denom
}

/// Indices of a maximal linearly independent subset of `rows`, scanned in order.
///
/// Uses modified Gram-Schmidt against the rows already accepted plus `basis`.
pub fn independent_rows(rows: &[DVector<f64>], basis: &mut Vec<DVector<f64>>, rel_tol: f64) -> Vec<usize> {
    let mut accepted = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let scale = row.norm();
        if scale == 0.0 {
            continue;
        }
        let mut r = row.clone();
        for q in basis.iter() {
            let proj = q.dot(&r);
            r.axpy(-proj, q, 1.0);
        }
        // second pass for stability
        for q in basis.iter() {
            let proj = q.dot(&r);
            r.axpy(-proj, q, 1.0);
        }
        let rn = r.norm();
        if rn > rel_tol * scale {
            basis.push(r / rn);
            accepted.push(i);
        }
    }
    accepted
}

/// Smallest eigenvalue of a symmetric matrix (0 for an empty matrix).
pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 0 {
        return f64::INFINITY;
    }
    sym.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 0 {
        return 0.0;
    }
    sym.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Spectral norm of a general matrix.
pub fn spectral_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    a.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn is_finite(v: &DVector<f64>) -> bool {
    v.iter().all(|x| x.is_finite())
}
