use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::NlpProblem;

/// Stochastic gradient source drawing `g ~ N(grad f(x), eps_g (I + e e^T))`.
///
/// Each draw is a pure function of `(seed, draw index)`: the index selects a
/// ChaCha stream, so replaying a run reproduces every sample. The correlated
/// covariance is sampled through its rank-one structure,
/// `sqrt(eps_g) * (xi + eta * e)` with independent standard normals `xi` and
/// `eta`, which has covariance exactly `eps_g (I + e e^T)`.
///
/// Not `Sync`-shared by design of its counter; give each run its own oracle.
#[derive(Debug, Clone)]
pub struct GradientOracle {
    noise_scale: f64,
    seed: u64,
    sample_counter: u64,
    multiplier: f64,
}

impl GradientOracle {
    pub fn new(noise_scale: f64, seed: u64) -> Self {
        assert!(noise_scale >= 0.0 && noise_scale.is_finite(), "noise scale must be nonnegative");
        GradientOracle { noise_scale, seed, sample_counter: 0, multiplier: 1.0 }
    }

    /// Noise-free oracle returning the true gradient.
    pub fn exact() -> Self {
        Self::new(0.0, 0)
    }

    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn sample_counter(&self) -> u64 {
        self.sample_counter
    }

    pub fn is_exact(&self) -> bool {
        self.effective_scale() == 0.0
    }

    /// Scales the covariance by `multiplier` for subsequent draws; used to
    /// anneal the noise alongside a diminishing step-size schedule.
    pub fn set_noise_multiplier(&mut self, multiplier: f64) {
        assert!(multiplier >= 0.0);
        self.multiplier = multiplier;
    }

    fn effective_scale(&self) -> f64 {
        self.noise_scale * self.multiplier
    }

    /// Bound on `E ||g - grad f||^2`, i.e. the trace of the covariance.
    pub fn variance_bound(&self, n: usize) -> f64 {
        2.0 * n as f64 * self.effective_scale()
    }

    pub fn sample(&mut self, problem: &NlpProblem, x: &DVector<f64>) -> DVector<f64> {
        let g = self.sample_at(problem, x, self.sample_counter);
        self.sample_counter += 1;
        g
    }

    /// The draw with the given index, without advancing the counter.
    pub fn sample_at(&self, problem: &NlpProblem, x: &DVector<f64>, index: u64) -> DVector<f64> {
        let mut g = problem.gradient(x);
        let scale = self.effective_scale();
        if scale == 0.0 {
            return g;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        let common: f64 = rng.sample(StandardNormal);
        let s = scale.sqrt();
        for gi in g.iter_mut() {
            let own: f64 = rng.sample(StandardNormal);
            *gi += s * (own + common);
        }
        g
    }
}
