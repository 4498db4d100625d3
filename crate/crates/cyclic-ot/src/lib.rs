//! Optimal transport solvers that exploit n-order cyclic symmetry.
//!
//! When the marginals are n concatenated copies of a length-m block and the
//! cost matrix is block-circulant, the linear problem reduces to an m-sized
//! transportation problem over an aggregated cost, and the strongly convex
//! regularized problem reduces to a dual with only 2m variables. This crate
//! implements both reductions, the entropic (Sinkhorn) specialization with a
//! two-stage variant for approximately symmetric data, direct solvers used as
//! baselines and oracles, instance generators, and a benchmark harness.
//!
//! All numeric code is generic over the scalar type ([`scalar::Real`], i.e.
//! f32 or f64); the aliases at the crate root fix f64, which is what the CLI
//! and the benchmark harness use.

pub mod bench;
pub mod clot;
pub mod core;
pub mod datagen;
pub mod sinkhorn;
pub mod srot;
pub mod io;
pub mod lot;
pub mod scalar;

pub use crate::core::Mat;
pub use crate::scalar::Real;

/// f64 aliases for the common types.
pub type Mat64 = crate::core::Mat<f64>;
pub type ProbabilityVector64 = crate::core::ProbabilityVector<f64>;
pub type CyclicProblem64 = crate::core::CyclicProblem<f64>;
pub type DenseProblem64 = crate::core::DenseProblem<f64>;
pub type TransportPlan64 = crate::core::TransportPlan<f64>;
pub type SolveReport64 = crate::core::SolveReport<f64>;
