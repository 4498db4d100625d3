//! Problem and result types shared by every solver.

use std::fmt;

use serde::Serialize;

use crate::core::matrix::Mat;
use crate::scalar::Real;

/// Absolute tolerance on mass-balance checks (sums to 1, supply = demand).
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum CoreError {
    /// Shape or value constraint violated; the message names the field.
    Invalid(String),
    /// The requested symmetry order does not divide the dense dimension.
    OrderDoesNotDivide { n: usize, d: usize },
    /// Input fails the periodicity / block-circulant check beyond tolerance.
    Asymmetric(SymmetryViolation),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Invalid(msg) => write!(f, "invalid input: {msg}"),
            CoreError::OrderDoesNotDivide { n, d } => {
                write!(f, "order {n} does not divide dimension {d}")
            }
            CoreError::Asymmetric(v) => write!(f, "symmetry violation: {v}"),
        }
    }
}

impl std::error::Error for CoreError {}

/// Largest deviation from exact n-order symmetry and where it sits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymmetryViolation {
    pub magnitude: f64,
    pub site: ViolationSite,
}

/// Location of a symmetry violation in block coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationSite {
    /// a[i + m*k] differs from a[i].
    MarginalA { i: usize, k: usize },
    /// b[i + m*k] differs from b[i].
    MarginalB { i: usize, k: usize },
    /// A copy of block entry (i, j) at cyclic offset k differs from the reference copy.
    Cost { i: usize, j: usize, k: usize },
}

impl fmt::Display for SymmetryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.site {
            ViolationSite::MarginalA { i, k } => {
                write!(f, "|{:.3e}| in marginal a at (i={i}, k={k})", self.magnitude)
            }
            ViolationSite::MarginalB { i, k } => {
                write!(f, "|{:.3e}| in marginal b at (i={i}, k={k})", self.magnitude)
            }
            ViolationSite::Cost { i, j, k } => {
                write!(f, "|{:.3e}| in cost at (i={i}, j={j}, k={k})", self.magnitude)
            }
        }
    }
}

/// Non-negative vector summing to 1 (within `MASS_TOL`).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector<T>(Vec<T>);

impl<T: Real> ProbabilityVector<T> {
    pub fn new(entries: Vec<T>) -> Result<Self, CoreError> {
        if entries.is_empty() {
            return Err(CoreError::Invalid("probability vector is empty".into()));
        }
        if entries.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(CoreError::Invalid(
                "probability vector has a negative or non-finite entry".into(),
            ));
        }
        let sum: T = entries.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(MASS_TOL) {
            return Err(CoreError::Invalid(format!(
                "probability vector sums to {sum}, expected 1 within {MASS_TOL:.0e}"
            )));
        }
        Ok(Self(entries))
    }

    /// Normalizes non-negative weights to sum 1.
    pub fn from_weights(weights: Vec<T>) -> Result<Self, CoreError> {
        if weights.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(CoreError::Invalid("weights must be non-negative and finite".into()));
        }
        let sum: T = weights.iter().copied().sum();
        if sum <= T::zero() {
            return Err(CoreError::Invalid("weights sum to zero".into()));
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    pub fn uniform(d: usize) -> Self {
        let v = T::one() / T::of(d as f64);
        Self(vec![v; d])
    }

    /// Internal constructor for vectors whose mass balance is guaranteed by
    /// construction (e.g. n tiled copies of a 1/n-mass block, where the
    /// public 1e-12 sum check could reject legitimate accumulated rounding).
    pub(crate) fn new_unchecked(entries: Vec<T>) -> Self {
        debug_assert!(entries.iter().all(|v| *v >= T::zero()));
        Self(entries)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }
}

/// Reduced representation of an n-order cyclically symmetric problem:
/// marginal blocks of length m and n cost blocks of size m x m.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclicProblem<T> {
    alpha: Vec<T>,
    beta: Vec<T>,
    cost_blocks: Vec<Mat<T>>,
}

impl<T: Real> CyclicProblem<T> {
    pub fn new(alpha: Vec<T>, beta: Vec<T>, cost_blocks: Vec<Mat<T>>) -> Result<Self, CoreError> {
        let n = cost_blocks.len();
        let m = alpha.len();
        if n == 0 {
            return Err(CoreError::Invalid("need at least one cost block".into()));
        }
        if m == 0 || beta.len() != m {
            return Err(CoreError::Invalid(format!(
                "marginal blocks must be equal non-zero length, got {m} and {}",
                beta.len()
            )));
        }
        for (k, block) in cost_blocks.iter().enumerate() {
            if block.rows() != m || block.cols() != m {
                return Err(CoreError::Invalid(format!(
                    "cost block {k} is {}x{}, expected {m}x{m}",
                    block.rows(),
                    block.cols()
                )));
            }
            if block.iter().any(|v| !v.is_finite() || *v < T::zero()) {
                return Err(CoreError::Invalid(format!(
                    "cost block {k} has a negative or non-finite entry"
                )));
            }
        }
        let target = T::one() / T::of(n as f64);
        for (name, v) in [("alpha", &alpha), ("beta", &beta)] {
            if v.iter().any(|x| !x.is_finite() || *x < T::zero()) {
                return Err(CoreError::Invalid(format!("{name} has a negative entry")));
            }
            let sum: T = v.iter().copied().sum();
            if (sum - target).abs() > T::of(MASS_TOL) {
                return Err(CoreError::Invalid(format!(
                    "{name} sums to {sum}, expected 1/{n} within {MASS_TOL:.0e}"
                )));
            }
        }
        Ok(Self { alpha, beta, cost_blocks })
    }

    /// Symmetry order n.
    pub fn order(&self) -> usize {
        self.cost_blocks.len()
    }

    /// Block size m.
    pub fn block_size(&self) -> usize {
        self.alpha.len()
    }

    /// Dimension d = n * m of the dense counterpart.
    pub fn dense_dim(&self) -> usize {
        self.order() * self.block_size()
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    pub fn cost_blocks(&self) -> &[Mat<T>] {
        &self.cost_blocks
    }

    pub fn block(&self, k: usize) -> &Mat<T> {
        &self.cost_blocks[k]
    }
}

/// Full-size problem: two probability vectors and a d x d cost matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseProblem<T> {
    a: ProbabilityVector<T>,
    b: ProbabilityVector<T>,
    cost: Mat<T>,
}

impl<T: Real> DenseProblem<T> {
    pub fn new(
        a: ProbabilityVector<T>,
        b: ProbabilityVector<T>,
        cost: Mat<T>,
    ) -> Result<Self, CoreError> {
        let d = a.len();
        if b.len() != d {
            return Err(CoreError::Invalid(format!(
                "marginals disagree in length: {d} vs {}",
                b.len()
            )));
        }
        if cost.rows() != d || cost.cols() != d {
            return Err(CoreError::Invalid(format!(
                "cost is {}x{}, expected {d}x{d}",
                cost.rows(),
                cost.cols()
            )));
        }
        if cost.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(CoreError::Invalid("cost has a negative or non-finite entry".into()));
        }
        Ok(Self { a, b, cost })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    pub fn a(&self) -> &[T] {
        self.a.as_slice()
    }

    pub fn b(&self) -> &[T] {
        self.b.as_slice()
    }

    pub fn cost(&self) -> &Mat<T> {
        &self.cost
    }
}

/// A transport plan, either as the n cyclic blocks or as a full dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum TransportPlan<T> {
    Blocks(Vec<Mat<T>>),
    Dense(Mat<T>),
}

impl<T: Real> TransportPlan<T> {
    pub fn blocks(blocks: Vec<Mat<T>>) -> Result<Self, CoreError> {
        if blocks.is_empty() {
            return Err(CoreError::Invalid("plan needs at least one block".into()));
        }
        let m = blocks[0].rows();
        for (k, b) in blocks.iter().enumerate() {
            if b.rows() != m || b.cols() != m {
                return Err(CoreError::Invalid(format!("plan block {k} has mismatched shape")));
            }
            if b.iter().any(|v| *v < T::zero()) {
                return Err(CoreError::Invalid(format!("plan block {k} has a negative entry")));
            }
        }
        Ok(TransportPlan::Blocks(blocks))
    }

    pub fn dense(plan: Mat<T>) -> Result<Self, CoreError> {
        if plan.iter().any(|v| *v < T::zero()) {
            return Err(CoreError::Invalid("plan has a negative entry".into()));
        }
        Ok(TransportPlan::Dense(plan))
    }

    /// Symmetry order carried by the representation (1 for dense).
    pub fn order(&self) -> usize {
        match self {
            TransportPlan::Blocks(b) => b.len(),
            TransportPlan::Dense(_) => 1,
        }
    }

    pub fn total_mass(&self) -> T {
        match self {
            TransportPlan::Blocks(b) => {
                let block_mass: T = b.iter().map(Mat::sum).sum();
                T::of(b.len() as f64) * block_mass
            }
            TransportPlan::Dense(m) => m.sum(),
        }
    }

    pub fn as_blocks(&self) -> Option<&[Mat<T>]> {
        match self {
            TransportPlan::Blocks(b) => Some(b),
            TransportPlan::Dense(_) => None,
        }
    }

    pub fn as_dense(&self) -> Option<&Mat<T>> {
        match self {
            TransportPlan::Dense(m) => Some(m),
            TransportPlan::Blocks(_) => None,
        }
    }
}

/// A timed phase inside a solve (kernel build, iterations, one stage, ...).
#[derive(Debug, Clone, Serialize)]
pub struct Phase {
    pub label: String,
    pub seconds: f64,
    pub iterations: usize,
}

/// What every solver reports back, at full-problem scale so that direct and
/// reduced algorithms are directly comparable.
#[derive(Debug, Clone, Serialize)]
pub struct SolveReport<T> {
    pub algorithm: String,
    /// Transport cost of the (expanded) plan.
    pub objective: T,
    /// l2 norm of the column residual T^t 1 - b.
    pub marginal_error: T,
    /// l2 norm of the row residual T 1 - a.
    pub row_marginal_error: T,
    pub iterations: usize,
    /// Wall-clock seconds from inputs to solution, including kernel or
    /// aggregate construction and plan reconstruction.
    pub wall_time: f64,
    pub converged: bool,
    /// Per-phase breakdown; empty when the solver has a single phase.
    pub phases: Vec<Phase>,
}

impl<T: Real> SolveReport<T> {
    pub fn new(algorithm: impl Into<String>) -> Self {
        Self {
            algorithm: algorithm.into(),
            objective: T::zero(),
            marginal_error: T::zero(),
            row_marginal_error: T::zero(),
            iterations: 0,
            wall_time: 0.0,
            converged: false,
            phases: Vec::new(),
        }
    }
}
