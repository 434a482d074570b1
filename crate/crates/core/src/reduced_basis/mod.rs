//! Reduced-basis approximation of parameter-separable parabolic problems:
//! separable expansion of the least-squares forms, weak greedy training,
//! online solves with the exact residual estimator, and persistence.

mod benchmark;
mod model;
mod persist;
mod separable;

pub use benchmark::{
    benchmark_exact, benchmark_problem, benchmark_truth_space, BENCHMARK_END_TIME, BENCHMARK_REFERENCE,
};
pub use model::{
    best_truth_error, greedy_offline, EstimatorKind, truth_solve, GreedyOptions, OnlineResult, ReducedModel, StopReason,
    TrainingHistory,
};
pub use separable::{expand_forms, Monomial, ParameterDomain, SeparableForms, SeparableParabolicProblem};
