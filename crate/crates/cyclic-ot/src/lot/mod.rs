//! Exact linear optimal transport on dense inputs: the workhorse behind the
//! reduced solver and the independent oracle used to cross-check it.
//!
//! Masses are rescaled to 64-bit integers before solving, so pivoting and
//! augmenting run in exact integer arithmetic; the flows are rescaled back at
//! the end. Both solvers share that preprocessing and nothing else.

mod oracle;
mod simplex;

use std::fmt;
use std::time::Instant;

use crate::core::matrix::Mat;
use crate::core::metrics::l2_distance;
use crate::core::problem::{SolveReport, MASS_TOL};
use crate::scalar::Real;

/// Source-side size cap on the oracle; it exists to brute-force small
/// problems (expanded checks included), not to compete with the simplex.
pub const ORACLE_SIZE_LIMIT: usize = 64;

/// Integer units per unit of mass. Large enough that rounding d <= 4096
/// marginals perturbs them below the 1e-10 feasibility reporting bar, small
/// enough that unit-mass problems stay far from i64 overflow.
const MASS_SCALE: f64 = 1e15;

#[derive(Debug, Clone, PartialEq)]
pub enum LotError {
    /// Total supply and demand differ beyond the 1e-12 balance tolerance.
    Unbalanced { supply: f64, demand: f64 },
    /// A cost entry is NaN or infinite.
    NonFiniteCost,
    /// Masses must be non-negative with positive total.
    BadMasses(String),
    /// Oracle called beyond its size limit.
    SizeLimit { m: usize, limit: usize },
    Internal(String),
}

impl fmt::Display for LotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LotError::Unbalanced { supply, demand } => {
                write!(f, "total supply {supply} does not match total demand {demand}")
            }
            LotError::NonFiniteCost => write!(f, "cost matrix has a non-finite entry"),
            LotError::BadMasses(msg) => write!(f, "bad masses: {msg}"),
            LotError::SizeLimit { m, limit } => {
                write!(f, "oracle supports up to {limit} sources, got {m}")
            }
            LotError::Internal(msg) => write!(f, "internal solver error: {msg}"),
        }
    }
}

impl std::error::Error for LotError {}

/// Result of an exact LOT solve: an optimal vertex of the transportation
/// polytope together with dual potentials certifying it.
#[derive(Debug, Clone)]
pub struct LotSolution<T> {
    pub plan: Mat<T>,
    pub value: T,
    /// Row duals u with u_i + v_j <= G_ij, equality wherever plan > 0.
    pub potential_u: Vec<T>,
    /// Column duals v.
    pub potential_v: Vec<T>,
    /// True when the cost matrix contained negative entries (accepted, but
    /// worth surfacing since transport costs are normally non-negative).
    pub negative_costs: bool,
    pub report: SolveReport<T>,
}

/// The bipartite transportation instance: m supply nodes, m demand nodes,
/// and an arc from every supply to every demand. Arc flows live in the
/// solution it produces; at optimality they conserve mass at every node.
#[derive(Debug, Clone)]
pub struct FlowNetwork<T> {
    supplies: Vec<T>,
    demands: Vec<T>,
    costs: Mat<T>,
}

impl<T: Real> FlowNetwork<T> {
    pub fn new(supplies: Vec<T>, demands: Vec<T>, costs: Mat<T>) -> Result<Self, LotError> {
        let m = supplies.len();
        if demands.len() != m || costs.rows() != m || costs.cols() != m {
            return Err(LotError::BadMasses(format!(
                "shapes disagree: {m} supplies, {} demands, {}x{} costs",
                demands.len(),
                costs.rows(),
                costs.cols()
            )));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(LotError::NonFiniteCost);
        }
        for (name, v) in [("supply", &supplies), ("demand", &demands)] {
            if v.iter().any(|x| !x.is_finite() || *x < T::zero()) {
                return Err(LotError::BadMasses(format!("{name} has a negative entry")));
            }
        }
        let total_supply: T = supplies.iter().copied().sum();
        let total_demand: T = demands.iter().copied().sum();
        if (total_supply - total_demand).abs() > T::of(MASS_TOL) {
            return Err(LotError::Unbalanced {
                supply: total_supply.to_f64().unwrap_or(f64::NAN),
                demand: total_demand.to_f64().unwrap_or(f64::NAN),
            });
        }
        if total_supply <= T::zero() {
            return Err(LotError::BadMasses("total mass is zero".into()));
        }
        Ok(Self { supplies, demands, costs })
    }

    pub fn size(&self) -> usize {
        self.supplies.len()
    }

    /// Network simplex solve.
    pub fn solve(&self) -> Result<LotSolution<T>, LotError> {
        let start = Instant::now();
        let (supply, demand, scale) = self.integer_masses();
        let outcome = simplex::solve_transportation(&supply, &demand, &self.costs)?;
        let mut solution =
            self.assemble("lot", &outcome.flows, &outcome.potentials[..2 * self.size()], scale);
        solution.report.iterations = outcome.pivots;
        solution.report.wall_time = start.elapsed().as_secs_f64();
        Ok(solution)
    }

    /// Successive-shortest-path solve, the independent oracle.
    pub fn solve_ssp(&self) -> Result<LotSolution<T>, LotError> {
        let start = Instant::now();
        let (supply, demand, scale) = self.integer_masses();
        let outcome = oracle::solve_transportation_ssp(&supply, &demand, &self.costs)?;
        let mut solution = self.assemble("lot-oracle", &outcome.flows, &outcome.potentials, scale);
        solution.report.iterations = outcome.augmentations;
        solution.report.wall_time = start.elapsed().as_secs_f64();
        Ok(solution)
    }

    /// Rounds masses to integer units and repairs the sums so that supply and
    /// demand balance exactly; the residual lands on the largest entry.
    fn integer_masses(&self) -> (Vec<i64>, Vec<i64>, f64) {
        let total: f64 = self.supplies.iter().map(|x| x.to_f64().unwrap()).sum();
        let mut scale = MASS_SCALE;
        // Keep totals well inside i64 range for heavyweight mass vectors.
        while total * scale > 4.0e18 {
            scale /= 10.0;
        }
        let round = |v: &[T]| -> Vec<i64> {
            v.iter().map(|x| (x.to_f64().unwrap() * scale).round() as i64).collect()
        };
        let mut supply = round(&self.supplies);
        let mut demand = round(&self.demands);
        let diff: i64 = supply.iter().sum::<i64>() - demand.iter().sum::<i64>();
        let fix = if diff > 0 { &mut demand } else { &mut supply };
        let largest = fix
            .iter()
            .enumerate()
            .max_by_key(|(_, &v)| v)
            .map(|(i, _)| i)
            .expect("non-empty masses");
        fix[largest] += diff.abs();
        (supply, demand, scale)
    }

    fn assemble(
        &self,
        algorithm: &str,
        flows: &[i64],
        node_potentials: &[T],
        scale: f64,
    ) -> LotSolution<T> {
        let m = self.size();
        let inv_scale = T::of(1.0 / scale);
        let plan =
            Mat::from_fn(m, m, |i, j| T::of(flows[i * m + j] as f64) * inv_scale);
        let value = self.costs.dot(&plan);

        // u_i = -pi_i, v_j = pi_{m+j}, shifted so u_0 = 0; big-M offsets
        // inherited from the artificial root cancel in the shift.
        let mut u: Vec<T> = (0..m).map(|i| -node_potentials[i]).collect();
        let mut v: Vec<T> = (0..m).map(|j| node_potentials[m + j]).collect();
        let shift = u[0];
        for x in u.iter_mut() {
            *x -= shift;
        }
        for x in v.iter_mut() {
            *x += shift;
        }

        let mut report = SolveReport::new(algorithm);
        report.objective = value;
        report.row_marginal_error = l2_distance(&plan.row_sums(), &self.supplies);
        report.marginal_error = l2_distance(&plan.col_sums(), &self.demands);
        report.converged = true;
        LotSolution {
            plan,
            value,
            potential_u: u,
            potential_v: v,
            negative_costs: self.costs.iter().any(|c| *c < T::zero()),
            report,
        }
    }
}

/// Solves the transportation problem min <G, S> subject to S 1 = alpha,
/// S^t 1 = beta, S >= 0 by primal network simplex. The result is an optimal
/// vertex: at most 2m - 1 entries of the plan are non-zero.
pub fn solve_lot<T: Real>(
    alpha: &[T],
    beta: &[T],
    costs: &Mat<T>,
) -> Result<LotSolution<T>, LotError> {
    FlowNetwork::new(alpha.to_vec(), beta.to_vec(), costs.clone())?.solve()
}

/// Same contract as [`solve_lot`], computed by successive shortest paths.
/// Limited to small instances; use it to cross-check, not to solve.
pub fn solve_lot_oracle<T: Real>(
    alpha: &[T],
    beta: &[T],
    costs: &Mat<T>,
) -> Result<LotSolution<T>, LotError> {
    if alpha.len() > ORACLE_SIZE_LIMIT {
        return Err(LotError::SizeLimit { m: alpha.len(), limit: ORACLE_SIZE_LIMIT });
    }
    FlowNetwork::new(alpha.to_vec(), beta.to_vec(), costs.clone())?.solve_ssp()
}
