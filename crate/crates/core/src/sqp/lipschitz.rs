use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::problem::{GradientOracle, NlpProblem};

/// Mixed into the oracle seed so that sampling directions never share a
/// stream with gradient noise.
const DIRECTION_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzEstimate {
    pub l: f64,
    pub gamma: f64,
    /// Gradient draws taken from the oracle.
    pub samples: u64,
}

/// Largest pairwise difference quotients of sampled gradients and of the
/// constraint Jacobian (Frobenius norm) over `n_samples` points on a sphere of
/// the given radius around `x`, projected onto `x >= 0`. Both values are
/// floored at `floor`. `stream` selects the direction sequence.
pub fn estimate_lipschitz(
    problem: &NlpProblem,
    oracle: &mut GradientOracle,
    x: &DVector<f64>,
    radius: f64,
    n_samples: usize,
    floor: f64,
    stream: u64,
) -> LipschitzEstimate {
    assert!(radius > 0.0 && n_samples >= 2);
    let n = x.len();
    let mut rng = ChaCha8Rng::seed_from_u64(oracle.seed() ^ DIRECTION_SEED_SALT);
    rng.set_stream(stream);
    let mut points = Vec::with_capacity(n_samples);
    let mut grads = Vec::with_capacity(n_samples);
    let mut jacs = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut u = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        let p = (x + radius * u).map(|v: f64| v.max(0.0));
        grads.push(oracle.sample(problem, &p));
        jacs.push(problem.jacobian(&p));
        points.push(p);
    }
    let mut l = floor;
    let mut gamma = floor;
    for i in 0..n_samples {
        for j in (i + 1)..n_samples {
            let dist = (&points[i] - &points[j]).norm();
            if dist == 0.0 {
                continue;
            }
            l = l.max((&grads[i] - &grads[j]).norm() / dist);
            if problem.m > 0 {
                gamma = gamma.max((&jacs[i] - &jacs[j]).norm() / dist);
            }
        }
    }
    LipschitzEstimate { l, gamma, samples: n_samples as u64 }
}
