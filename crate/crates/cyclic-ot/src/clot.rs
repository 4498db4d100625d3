//! Reduction of the cyclically symmetric linear problem to an m-sized
//! transportation problem: aggregate the cost blocks by an elementwise
//! minimum over the cyclic offset, solve the small problem, then lift the
//! solution back onto the blocks at the offsets that attained the minimum.

use std::fmt;
use std::time::Instant;

use crate::core::matrix::Mat;
use crate::core::metrics::block_marginal_errors;
use crate::core::problem::{CoreError, CyclicProblem, Phase, SolveReport, TransportPlan};
use crate::lot::{solve_lot, LotError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum ClotError {
    Core(CoreError),
    Lot(LotError),
}

impl fmt::Display for ClotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClotError::Core(e) => write!(f, "{e}"),
            ClotError::Lot(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ClotError {}

impl From<CoreError> for ClotError {
    fn from(e: CoreError) -> Self {
        ClotError::Core(e)
    }
}

impl From<LotError> for ClotError {
    fn from(e: LotError) -> Self {
        ClotError::Lot(e)
    }
}

/// Elementwise minimum of the cost blocks over the cyclic offset, plus the
/// smallest offset attaining it for every entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedCost<T> {
    g: Mat<T>,
    /// Row-major m x m; entry (i, j) is the smallest argmin offset k.
    argmin: Vec<u32>,
    order: usize,
}

impl<T: Real> AggregatedCost<T> {
    pub fn g(&self) -> &Mat<T> {
        &self.g
    }

    pub fn argmin_index(&self, i: usize, j: usize) -> usize {
        self.argmin[i * self.g.cols() + j] as usize
    }

    pub fn order(&self) -> usize {
        self.order
    }
}

/// Builds the aggregated cost G_ij = min_k C_k[i][j]; ties resolve to the
/// smallest offset so the output is deterministic.
pub fn aggregate_cost<T: Real>(blocks: &[Mat<T>]) -> Result<AggregatedCost<T>, ClotError> {
    if blocks.is_empty() {
        return Err(CoreError::Invalid("need at least one cost block".into()).into());
    }
    let m = blocks[0].rows();
    if blocks.iter().any(|b| b.rows() != m || b.cols() != m) {
        return Err(CoreError::Invalid("cost blocks must share one square shape".into()).into());
    }
    let mut g = blocks[0].clone();
    let mut argmin = vec![0u32; m * m];
    for (k, block) in blocks.iter().enumerate().skip(1) {
        for i in 0..m {
            for j in 0..m {
                let c = block[(i, j)];
                if c < g[(i, j)] {
                    g[(i, j)] = c;
                    argmin[i * m + j] = k as u32;
                }
            }
        }
    }
    Ok(AggregatedCost { g, argmin, order: blocks.len() })
}

/// Spreads the small-problem solution back over the blocks: each entry lands
/// on its argmin offset, every other offset stays zero, so the blocks sum to
/// the small plan exactly.
pub fn lift_solution<T: Real>(small_plan: &Mat<T>, agg: &AggregatedCost<T>) -> Vec<Mat<T>> {
    let m = agg.g.rows();
    debug_assert_eq!(small_plan.rows(), m);
    debug_assert_eq!(small_plan.cols(), m);
    let mut blocks = vec![Mat::zeros(m, m); agg.order];
    for i in 0..m {
        for j in 0..m {
            blocks[agg.argmin_index(i, j)][(i, j)] = small_plan[(i, j)];
        }
    }
    blocks
}

/// Solves the cyclic linear problem through the aggregated reduction. The
/// reported objective is at full-problem scale (n times the small value).
pub fn solve_clot<T: Real>(
    problem: &CyclicProblem<T>,
) -> Result<(TransportPlan<T>, SolveReport<T>), ClotError> {
    let start = Instant::now();
    let agg = aggregate_cost(problem.cost_blocks())?;
    let aggregate_time = start.elapsed().as_secs_f64();

    let lot = solve_lot(problem.alpha(), problem.beta(), agg.g())?;
    let solve_time = start.elapsed().as_secs_f64() - aggregate_time;

    let blocks = lift_solution(&lot.plan, &agg);
    let n = problem.order();
    let (row_err, col_err) = block_marginal_errors(&blocks, problem.alpha(), problem.beta())?;

    let mut report = SolveReport::new("clot");
    report.objective = T::of(n as f64) * lot.value;
    report.row_marginal_error = row_err;
    report.marginal_error = col_err;
    report.iterations = lot.report.iterations;
    report.converged = true;
    report.wall_time = start.elapsed().as_secs_f64();
    report.phases = vec![
        Phase { label: "aggregate".into(), seconds: aggregate_time, iterations: 0 },
        Phase { label: "solve".into(), seconds: solve_time, iterations: lot.report.iterations },
        Phase {
            label: "lift".into(),
            seconds: report.wall_time - aggregate_time - solve_time,
            iterations: 0,
        },
    ];
    Ok((TransportPlan::Blocks(blocks), report))
}

/// The intuitive-but-wrong strategy: solve the first block on its own and
/// replicate the solution over the diagonal. Feasible, but ignores cheaper
/// cross-block routes; kept as a baseline for regression tests and benches.
pub fn solve_naive_per_block<T: Real>(
    problem: &CyclicProblem<T>,
) -> Result<(TransportPlan<T>, SolveReport<T>), ClotError> {
    let start = Instant::now();
    let n = problem.order();
    let m = problem.block_size();
    let lot = solve_lot(problem.alpha(), problem.beta(), problem.block(0))?;
    let mut blocks = vec![Mat::zeros(m, m); n];
    blocks[0] = lot.plan;
    let (row_err, col_err) = block_marginal_errors(&blocks, problem.alpha(), problem.beta())?;

    let mut report = SolveReport::new("naive-block");
    report.objective = T::of(n as f64) * lot.value;
    report.row_marginal_error = row_err;
    report.marginal_error = col_err;
    report.iterations = lot.report.iterations;
    report.converged = true;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok((TransportPlan::Blocks(blocks), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::symmetry::expand;
    use crate::lot::solve_lot_oracle;

    #[test]
    fn aggregate_takes_elementwise_minimum() {
        let c0 = Mat::from_rows(&[vec![3.0, 1.0], vec![4.0, 1.0]]);
        let c1 = Mat::from_rows(&[vec![5.0, 9.0], vec![2.0, 6.0]]);
        let agg = aggregate_cost(&[c0, c1]).unwrap();
        assert_eq!(agg.g(), &Mat::from_rows(&[vec![3.0, 1.0], vec![2.0, 1.0]]));
        assert_eq!(agg.argmin_index(0, 0), 0);
        assert_eq!(agg.argmin_index(0, 1), 0);
        assert_eq!(agg.argmin_index(1, 0), 1);
        assert_eq!(agg.argmin_index(1, 1), 0);
    }

    #[test]
    fn aggregate_breaks_ties_to_smallest_offset() {
        let c0 = Mat::from_rows(&[vec![2.0]]);
        let c1 = Mat::from_rows(&[vec![2.0]]);
        let agg = aggregate_cost(&[c0, c1]).unwrap();
        assert_eq!(agg.g()[(0, 0)], 2.0);
        assert_eq!(agg.argmin_index(0, 0), 0);
    }

    #[test]
    fn aggregate_order_one_is_identity() {
        let c0 = Mat::from_rows(&[vec![1.5, 2.5], vec![3.5, 4.5]]);
        let agg = aggregate_cost(&[c0.clone()]).unwrap();
        assert_eq!(agg.g(), &c0);
        assert!(agg.argmin.iter().all(|&k| k == 0));
    }

    #[test]
    fn lift_places_mass_at_argmin_offsets() {
        let c0 = Mat::from_rows(&[vec![5.0]]);
        let c1 = Mat::from_rows(&[vec![1.0]]);
        let agg = aggregate_cost(&[c0, c1]).unwrap();
        let blocks = lift_solution(&Mat::from_rows(&[vec![0.5]]), &agg);
        assert_eq!(blocks[0], Mat::from_rows(&[vec![0.0]]));
        assert_eq!(blocks[1], Mat::from_rows(&[vec![0.5]]));

        // A zero small-plan entry stays zero in every block.
        let blocks = lift_solution(&Mat::from_rows(&[vec![0.0]]), &agg);
        assert!(blocks.iter().all(|b| b[(0, 0)] == 0.0));

        // Order one lifts to the plan itself.
        let single = aggregate_cost(&[Mat::from_rows(&[vec![2.0]])]).unwrap();
        let blocks = lift_solution(&Mat::from_rows(&[vec![0.7]]), &single);
        assert_eq!(blocks, vec![Mat::from_rows(&[vec![0.7]])]);
    }

    #[test]
    fn solve_clot_crosses_blocks_when_cheaper() {
        let problem = CyclicProblem::new(
            vec![0.5_f64],
            vec![0.5_f64],
            vec![Mat::from_rows(&[vec![5.0]]), Mat::from_rows(&[vec![1.0]])],
        )
        .unwrap();
        let (plan, report) = solve_clot(&problem).unwrap();
        let blocks = plan.as_blocks().unwrap();
        assert_eq!(blocks[0][(0, 0)], 0.0);
        assert!((blocks[1][(0, 0)] - 0.5).abs() < 1e-12);
        assert!((report.objective - 1.0).abs() < 1e-10);

        // Brute-force check on the expanded d = 2 problem.
        let dense = expand(&problem);
        let oracle = solve_lot_oracle(dense.a(), dense.b(), dense.cost()).unwrap();
        assert!((report.objective - oracle.value).abs() < 1e-10);
    }

    #[test]
    fn solve_clot_order_one_matches_solve_lot_unscaled() {
        let block = Mat::from_rows(&[vec![2.0, 7.0], vec![1.0, 3.0]]);
        let problem =
            CyclicProblem::new(vec![0.6_f64, 0.4], vec![0.3, 0.7], vec![block.clone()]).unwrap();
        let (_, report) = solve_clot(&problem).unwrap();
        let direct = solve_lot(&[0.6, 0.4], &[0.3, 0.7], &block).unwrap();
        assert!((report.objective - direct.value).abs() < 1e-12);
    }

    #[test]
    fn zero_diagonal_block_gives_zero_objective() {
        let m = 3;
        let c0 = Mat::from_fn(m, m, |i, j| if i == j { 0.0 } else { 4.0 });
        let c1 = Mat::from_fn(m, m, |_, _| 9.0);
        let uniform = vec![1.0_f64 / 6.0; m];
        let problem = CyclicProblem::new(uniform.clone(), uniform, vec![c0, c1]).unwrap();
        let (_, report) = solve_clot(&problem).unwrap();
        assert!(report.objective.abs() < 1e-12);
    }

    #[test]
    fn lifted_plan_is_feasible_with_complementary_support() {
        let problem = CyclicProblem::new(
            vec![0.2_f64, 0.3],
            vec![0.25, 0.25],
            vec![
                Mat::from_rows(&[vec![3.0, 8.0], vec![2.0, 5.0]]),
                Mat::from_rows(&[vec![4.0, 1.0], vec![6.0, 5.0]]),
            ],
        )
        .unwrap();
        let agg = aggregate_cost(problem.cost_blocks()).unwrap();
        let (plan, _) = solve_clot(&problem).unwrap();
        let blocks = plan.as_blocks().unwrap();

        let mut row = vec![0.0; 2];
        let mut col = vec![0.0; 2];
        for b in blocks {
            for (acc, v) in row.iter_mut().zip(b.row_sums()) {
                *acc += v;
            }
            for (acc, v) in col.iter_mut().zip(b.col_sums()) {
                *acc += v;
            }
        }
        for (r, a) in row.iter().zip(problem.alpha()) {
            assert!((r - a).abs() < 1e-10);
        }
        for (c, b) in col.iter().zip(problem.beta()) {
            assert!((c - b).abs() < 1e-10);
        }
        for (k, b) in blocks.iter().enumerate() {
            for i in 0..2 {
                for j in 0..2 {
                    if b[(i, j)] > 0.0 {
                        assert_eq!(
                            problem.block(k)[(i, j)],
                            agg.g()[(i, j)],
                            "support off the aggregated minimum"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn naive_per_block_is_strictly_worse_on_cross_block_instances() {
        for scale in [0.5, 1.0, 2.0, 10.0] {
            let problem = CyclicProblem::new(
                vec![0.5_f64],
                vec![0.5_f64],
                vec![
                    Mat::from_rows(&[vec![5.0 * scale]]),
                    Mat::from_rows(&[vec![1.0 * scale]]),
                ],
            )
            .unwrap();
            let (_, fast) = solve_clot(&problem).unwrap();
            let (_, naive) = solve_naive_per_block(&problem).unwrap();
            assert!((fast.objective - scale).abs() < 1e-10);
            assert!((naive.objective - 5.0 * scale).abs() < 1e-10);
            assert!(naive.objective > fast.objective + 0.5 * scale);
        }
    }
}
