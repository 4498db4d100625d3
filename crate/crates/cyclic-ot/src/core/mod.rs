//! Domain types for cyclically symmetric optimal transport, block-circulant
//! expansion and folding, the symmetrization operator, and shared metrics.
//!
//! Everything here is immutable after construction and every operation is a
//! pure function, so values can be shared freely across threads.

pub mod matrix;
pub mod metrics;
pub mod problem;
pub mod symmetry;

pub use matrix::Mat;
pub use metrics::{
    block_marginal_errors, block_objective, l2_distance, marginal_error, objective,
    row_marginal_error,
};
pub use problem::{
    CoreError, CyclicProblem, DenseProblem, Phase, ProbabilityVector, SolveReport,
    SymmetryViolation, TransportPlan, ViolationSite, MASS_TOL,
};
pub use symmetry::{expand, expand_circulant, expand_plan, fold_average, symmetrize, validate_cyclic};
