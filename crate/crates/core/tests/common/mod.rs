#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ssqp::qp::ConvexQp;
use ssqp::step::{default_mu, normal_step};

/// Random strictly convex QP with a nonempty feasible region: `Q = M'M + 0.1 I`,
/// and the right-hand sides are built around a random feasible point.
pub fn random_qp(rng: &mut ChaCha8Rng, max_p: usize, max_r: usize, max_s: usize) -> ConvexQp {
    let p = rng.random_range(1..=max_p);
    let r = rng.random_range(0..=max_r.min(p));
    let s = rng.random_range(0..=max_s);
    let m = DMatrix::from_fn(p, p, |_, _| rng.random_range(-1.0..1.0));
    let q_mat = m.transpose() * &m + DMatrix::identity(p, p) * 0.1;
    let q = DVector::from_fn(p, |_, _| rng.random_range(-3.0..3.0));
    let a_eq = DMatrix::from_fn(r, p, |_, _| rng.random_range(-1.0..1.0));
    let a_in = DMatrix::from_fn(s, p, |_, _| rng.random_range(-1.0..1.0));
    let z_feas = DVector::from_fn(p, |_, _| rng.random_range(-2.0..2.0));
    let b_eq = &a_eq * &z_feas;
    let slack = DVector::from_fn(s, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..1.0) });
    let b_in = &a_in * &z_feas - slack;
    ConvexQp::new(q_mat, q, a_eq, b_eq, a_in, b_in).expect("well-formed QP")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random point and model data for the step subproblems: `x >= 0` with some
/// zero coordinates, a random Jacobian and residual, `H = F'F + 0.5 I`, and
/// the normal step `v` at that point.
pub struct StepInstance {
    pub x: DVector<f64>,
    pub c: DVector<f64>,
    pub j: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub v: DVector<f64>,
}

pub fn random_step_instance(rng: &mut ChaCha8Rng, max_n: usize) -> StepInstance {
    let n = rng.random_range(2..=max_n);
    let m = rng.random_range(0..=3.min(n - 1));
    let x = DVector::from_fn(n, |_, _| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) });
    let j = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let c = DVector::from_fn(m, |_, _| rng.random_range(-2.0..2.0));
    let v = normal_step(&x, &c, &j, default_mu(&c), 1e-9).expect("normal step").v;
    let f = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = f.transpose() * &f + DMatrix::identity(n, n) * 0.5;
    let g = DVector::from_fn(n, |_, _| rng.random_range(-3.0..3.0));
    StepInstance { x, c, j, h, g, v }
}
