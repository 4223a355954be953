//! Stochastic sequential quadratic optimization for equality-constrained
//! problems over the nonnegative orthant.

pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod problem;
pub mod qp;
pub mod sqp;
pub mod step;

pub use problem::{GradientOracle, NlpProblem};
pub use qp::{solve_qp, ConvexQp, QpSolution, QpStatus};
pub use sqp::{run, AlgoParams, IterationRecord, RunOutput, SqpError, Termination};
