mod common;

use nalgebra::DVector;
use proptest::prelude::*;
use rand::Rng;
use ssqp::harness::check_trajectory;
use ssqp::problem::suite::builtin_suite;
use ssqp::problem::GradientOracle;
use ssqp::sqp::{run, AlgoParams, LipschitzMode, Termination};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn random_starts_keep_invariants(seed in any::<u64>(), which in 0usize..12, analytic in any::<bool>()) {
        let suite = builtin_suite();
        let p = suite[which % suite.len()].clone();
        let mut rng = common::rng(seed);
        let x0 = DVector::from_fn(p.n, |_, _| if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..4.0) });
        let p = p.with_start(x0);
        let params = AlgoParams {
            max_gradient_samples: 600,
            lipschitz_mode: if analytic { LipschitzMode::Analytic } else { LipschitzMode::Estimate },
            ..AlgoParams::default()
        };
        let out = run(&p, &mut GradientOracle::new(1e-2, seed), &params).unwrap();
        let report = check_trajectory(&out.trajectory);
        prop_assert!(report.passed(), "{}: {:?}", p.name, &report.violations[..report.violations.len().min(3)]);
        prop_assert!(out.final_state.samples_used <= 600);
        prop_assert!(out.final_state.x.iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn runs_are_reproducible_per_seed() {
    let p = ssqp::problem::suite::find_problem("circle_linear").unwrap();
    let params = AlgoParams { max_gradient_samples: 800, ..AlgoParams::default() };
    let a = run(&p, &mut GradientOracle::new(1e-1, 42), &params).unwrap();
    let b = run(&p, &mut GradientOracle::new(1e-1, 42), &params).unwrap();
    let c = run(&p, &mut GradientOracle::new(1e-1, 43), &params).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    assert_ne!(a.trajectory, c.trajectory);
}

#[test]
fn deterministic_mode_uses_the_true_direction() {
    let p = ssqp::problem::suite::find_problem("hs6").unwrap();
    let params = AlgoParams { deterministic: true, max_iterations: Some(50), ..AlgoParams::default() };
    let out = run(&p, &mut GradientOracle::exact(), &params).unwrap();
    assert_eq!(out.termination, Termination::IterationLimit);
    for s in out.trajectory.iter().filter_map(|r| r.step.as_ref()) {
        assert_eq!(s.g, s.grad_f);
        assert_eq!(s.truth.as_ref().unwrap().d_true, s.d);
    }
}
