//! Fixtures shared by the benchmarks.

use sg_core::{ProblemConfig, StochasticProblem};

/// Problem at CoV 100% with the given stochastic dimension, degree and mesh.
pub fn fixture(n_stoch: usize, order: usize, mesh: usize) -> StochasticProblem {
    StochasticProblem::build(&ProblemConfig::new(n_stoch, order, mesh, 1.0)).expect("fixture builds")
}

/// Deterministic vector with entries in [-1, 1).
pub fn vector(len: usize) -> Vec<f64> {
    (0..len).map(|i| ((i * 7919) % 1000) as f64 / 500.0 - 1.0).collect()
}
