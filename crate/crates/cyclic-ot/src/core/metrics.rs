//! Objective values and marginal residuals, reported at full-problem scale.

use crate::core::matrix::Mat;
use crate::core::problem::{CoreError, CyclicProblem};
use crate::scalar::Real;

/// Transport cost <C, T> of a dense plan.
pub fn objective<T: Real>(cost: &Mat<T>, plan: &Mat<T>) -> Result<T, CoreError> {
    if cost.rows() != plan.rows() || cost.cols() != plan.cols() {
        return Err(CoreError::Invalid(format!(
            "cost is {}x{} but plan is {}x{}",
            cost.rows(),
            cost.cols(),
            plan.rows(),
            plan.cols()
        )));
    }
    Ok(cost.dot(plan))
}

/// Reduced-problem cost sum_k <C_k, T_k>. The dense objective of the expanded
/// plan is exactly n times this value.
pub fn block_objective<T: Real>(
    problem: &CyclicProblem<T>,
    blocks: &[Mat<T>],
) -> Result<T, CoreError> {
    let m = problem.block_size();
    if blocks.len() != problem.order() {
        return Err(CoreError::Invalid(format!(
            "expected {} plan blocks, got {}",
            problem.order(),
            blocks.len()
        )));
    }
    if blocks.iter().any(|b| b.rows() != m || b.cols() != m) {
        return Err(CoreError::Invalid("plan block shape mismatch".into()));
    }
    Ok(problem
        .cost_blocks()
        .iter()
        .zip(blocks)
        .map(|(c, t)| c.dot(t))
        .sum())
}

pub fn l2_distance<T: Real>(xs: &[T], ys: &[T]) -> T {
    debug_assert_eq!(xs.len(), ys.len());
    xs.iter()
        .zip(ys)
        .map(|(&x, &y)| (x - y) * (x - y))
        .sum::<T>()
        .sqrt()
}

/// Column residual ||T^t 1 - b||_2 of a dense plan.
pub fn marginal_error<T: Real>(plan: &Mat<T>, b: &[T]) -> Result<T, CoreError> {
    if plan.cols() != b.len() {
        return Err(CoreError::Invalid(format!(
            "plan has {} columns but b has length {}",
            plan.cols(),
            b.len()
        )));
    }
    Ok(l2_distance(&plan.col_sums(), b))
}

/// Row residual ||T 1 - a||_2 of a dense plan.
pub fn row_marginal_error<T: Real>(plan: &Mat<T>, a: &[T]) -> Result<T, CoreError> {
    if plan.rows() != a.len() {
        return Err(CoreError::Invalid(format!(
            "plan has {} rows but a has length {}",
            plan.rows(),
            a.len()
        )));
    }
    Ok(l2_distance(&plan.row_sums(), a))
}

/// Residuals of a block plan against (alpha, beta), scaled by sqrt(n) so they
/// equal the residuals of the expanded dense plan against (a, b).
///
/// The expanded plan repeats each block residual n times across the tiled
/// marginals, which multiplies the l2 norm by sqrt(n).
pub fn block_marginal_errors<T: Real>(
    blocks: &[Mat<T>],
    alpha: &[T],
    beta: &[T],
) -> Result<(T, T), CoreError> {
    let n = blocks.len();
    if n == 0 {
        return Err(CoreError::Invalid("plan needs at least one block".into()));
    }
    let m = alpha.len();
    if beta.len() != m || blocks.iter().any(|b| b.rows() != m || b.cols() != m) {
        return Err(CoreError::Invalid("block plan shape mismatch".into()));
    }
    let mut rows = vec![T::zero(); m];
    let mut cols = vec![T::zero(); m];
    for b in blocks {
        for (acc, v) in rows.iter_mut().zip(b.row_sums()) {
            *acc += v;
        }
        for (acc, v) in cols.iter_mut().zip(b.col_sums()) {
            *acc += v;
        }
    }
    let scale = T::of(n as f64).sqrt();
    Ok((scale * l2_distance(&rows, alpha), scale * l2_distance(&cols, beta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::symmetry::expand_plan;

    #[test]
    fn objective_examples() {
        let c = Mat::from_rows(&[vec![5.0, 1.0], vec![1.0, 5.0]]);
        let t = Mat::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]);
        assert_eq!(objective(&c, &t).unwrap(), 1.0);
        assert_eq!(objective(&Mat::zeros(2, 2), &t).unwrap(), 0.0);
        assert!(objective(&c, &Mat::zeros(3, 3)).is_err());
    }

    #[test]
    fn block_objective_is_one_nth_of_dense() {
        let problem = CyclicProblem::new(
            vec![0.5],
            vec![0.5],
            vec![Mat::from_rows(&[vec![5.0]]), Mat::from_rows(&[vec![1.0]])],
        )
        .unwrap();
        let blocks = vec![Mat::from_rows(&[vec![0.0]]), Mat::from_rows(&[vec![0.5]])];
        let small = block_objective(&problem, &blocks).unwrap();
        assert_eq!(small, 0.5);
        let dense_cost = Mat::from_rows(&[vec![5.0, 1.0], vec![1.0, 5.0]]);
        let dense_plan = expand_plan(&blocks).unwrap();
        assert_eq!(objective(&dense_cost, &dense_plan).unwrap(), 2.0 * small);
    }

    #[test]
    fn marginal_error_examples() {
        let feasible = Mat::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.5]]);
        assert_eq!(marginal_error(&feasible, &[0.5, 0.5]).unwrap(), 0.0);

        let lopsided = Mat::from_rows(&[vec![0.5, 0.0], vec![0.5, 0.0]]);
        let err = marginal_error(&lopsided, &[0.5, 0.5]).unwrap();
        assert!((err - 0.5_f64.sqrt()).abs() < 1e-15);

        let scaled = feasible.scale(0.9);
        let err = marginal_error(&scaled, &[0.5, 0.5]).unwrap();
        let b_norm = (0.5_f64 * 0.5 + 0.5 * 0.5).sqrt();
        assert!((err - 0.1 * b_norm).abs() < 1e-15);
    }

    #[test]
    fn block_errors_match_expanded_plan() {
        let blocks = vec![
            Mat::from_rows(&[vec![0.2, 0.05], vec![0.0, 0.1]]),
            Mat::from_rows(&[vec![0.05, 0.0], vec![0.1, 0.0]]),
        ];
        let alpha = [0.3, 0.2];
        let beta = [0.35, 0.15];
        let (row, col) = block_marginal_errors(&blocks, &alpha, &beta).unwrap();
        let dense = expand_plan(&blocks).unwrap();
        let a: Vec<f64> = alpha.iter().chain(&alpha).copied().collect();
        let b: Vec<f64> = beta.iter().chain(&beta).copied().collect();
        assert!((row - row_marginal_error(&dense, &a).unwrap()).abs() < 1e-15);
        assert!((col - marginal_error(&dense, &b).unwrap()).abs() < 1e-15);
    }
}
