//! Block-circulant expansion, folding, validation, and the symmetrization
//! operator that projects a plan onto the block-circulant subspace.

use crate::core::matrix::Mat;
use crate::core::problem::{
    CoreError, CyclicProblem, DenseProblem, ProbabilityVector, SymmetryViolation, ViolationSite,
    MASS_TOL,
};
use crate::scalar::Real;

/// Checks that `dense` is n-order symmetric within entrywise tolerance `tol`
/// and folds it to the reduced representation. On failure the error carries
/// the largest violation and its block coordinates.
///
/// Folding selects the first marginal block and the first block-row of the
/// cost, so expanding the result reproduces a strictly symmetric input
/// entry-for-entry.
pub fn validate_cyclic<T: Real>(
    dense: &DenseProblem<T>,
    n: usize,
    tol: T,
) -> Result<CyclicProblem<T>, CoreError> {
    if n == 0 {
        return Err(CoreError::Invalid("order must be at least 1".into()));
    }
    if tol < T::zero() {
        return Err(CoreError::Invalid("tolerance must be non-negative".into()));
    }
    let d = dense.dim();
    if d % n != 0 {
        return Err(CoreError::OrderDoesNotDivide { n, d });
    }
    let m = d / n;

    let mut worst: Option<SymmetryViolation> = None;
    let mut record = |mag: T, site: ViolationSite| {
        let mag = mag.to_f64().unwrap_or(f64::INFINITY);
        if worst.map_or(true, |w| mag > w.magnitude) {
            worst = Some(SymmetryViolation { magnitude: mag, site });
        }
    };

    for (name, v) in [("a", dense.a()), ("b", dense.b())] {
        for k in 1..n {
            for i in 0..m {
                let diff = (v[i + m * k] - v[i]).abs();
                if diff > tol {
                    let site = if name == "a" {
                        ViolationSite::MarginalA { i, k }
                    } else {
                        ViolationSite::MarginalB { i, k }
                    };
                    record(diff, site);
                }
            }
        }
    }

    let cost = dense.cost();
    // Reference copy of block k is block (0, k); every block (r, s) must
    // match reference block (s - r) mod n.
    for r in 1..n {
        for s in 0..n {
            let k = (s + n - r) % n;
            for i in 0..m {
                for j in 0..m {
                    let diff = (cost[(i + m * r, j + m * s)] - cost[(i, j + m * k)]).abs();
                    if diff > tol {
                        record(diff, ViolationSite::Cost { i, j, k });
                    }
                }
            }
        }
    }

    if let Some(v) = worst {
        return Err(CoreError::Asymmetric(v));
    }

    let fold_marginal = |v: &[T]| -> Vec<T> {
        let mut block = v[..m].to_vec();
        let target = T::one() / T::of(n as f64);
        let sum: T = block.iter().copied().sum();
        // Noise within tol can leave the first block slightly off the exact
        // 1/n mass; repair only then, so strict inputs fold bit-exactly.
        if (sum - target).abs() > T::of(MASS_TOL) {
            let scale = target / sum;
            for x in block.iter_mut() {
                *x = *x * scale;
            }
        }
        block
    };

    let alpha = fold_marginal(dense.a());
    let beta = fold_marginal(dense.b());
    let blocks: Vec<Mat<T>> =
        (0..n).map(|k| Mat::from_fn(m, m, |i, j| cost[(i, j + m * k)])).collect();
    CyclicProblem::new(alpha, beta, blocks)
}

/// Expands the reduced representation to the full dense problem: marginals
/// are n concatenated copies of the blocks and the cost is block-circulant.
pub fn expand<T: Real>(problem: &CyclicProblem<T>) -> DenseProblem<T> {
    let n = problem.order();
    let m = problem.block_size();
    let tile = |block: &[T]| -> Vec<T> {
        let mut v = Vec::with_capacity(n * m);
        for _ in 0..n {
            v.extend_from_slice(block);
        }
        v
    };
    let cost = expand_circulant(problem.cost_blocks());
    DenseProblem::new(
        ProbabilityVector::new_unchecked(tile(problem.alpha())),
        ProbabilityVector::new_unchecked(tile(problem.beta())),
        cost,
    )
    .expect("expansion of a valid cyclic problem is valid")
}

/// Places m x m blocks on the circulant pattern: block (r, s) of the output
/// is input block (s - r) mod n.
pub fn expand_circulant<T: Real>(blocks: &[Mat<T>]) -> Mat<T> {
    let n = blocks.len();
    assert!(n > 0, "need at least one block");
    let m = blocks[0].rows();
    let d = n * m;
    let mut out = Mat::zeros(d, d);
    for r in 0..n {
        for s in 0..n {
            let block = &blocks[(s + n - r) % n];
            for i in 0..m {
                let src = block.row(i);
                let row = out.row_mut(i + m * r);
                row[m * s..m * (s + 1)].copy_from_slice(src);
            }
        }
    }
    out
}

/// Expands plan blocks T_0..T_{n-1} to the dense d x d plan. The dense plan
/// carries n times the total mass of the blocks.
pub fn expand_plan<T: Real>(blocks: &[Mat<T>]) -> Result<Mat<T>, CoreError> {
    if blocks.is_empty() {
        return Err(CoreError::Invalid("plan needs at least one block".into()));
    }
    let m = blocks[0].rows();
    if blocks.iter().any(|b| b.rows() != m || b.cols() != m) {
        return Err(CoreError::Invalid("plan blocks must share one square shape".into()));
    }
    Ok(expand_circulant(blocks))
}

/// Averages a plan over conjugations by powers of the block shift: the result
/// is block-circulant, keeps the total mass, and keeps row/column sums that
/// are themselves n-periodic. Runs in O(d^2) without materializing the
/// permutation matrix.
pub fn symmetrize<T: Real>(plan: &Mat<T>, n: usize) -> Result<Mat<T>, CoreError> {
    if n == 0 {
        return Err(CoreError::Invalid("order must be at least 1".into()));
    }
    let d = plan.rows();
    if !plan.is_square() {
        return Err(CoreError::Invalid("plan must be square".into()));
    }
    if d % n != 0 {
        return Err(CoreError::OrderDoesNotDivide { n, d });
    }
    let m = d / n;
    let inv_n = T::one() / T::of(n as f64);
    // Anchoring the average at the k = 0 copy makes block-circulant inputs
    // exact fixed points.
    let out = Mat::from_fn(d, d, |row, col| {
        let (r, i) = (row / m, row % m);
        let (s, j) = (col / m, col % m);
        let anchor = plan[(row, col)];
        let mut delta = T::zero();
        for k in 1..n {
            let rk = (r + n - k) % n;
            let sk = (s + n - k) % n;
            delta += plan[(i + m * rk, j + m * sk)] - anchor;
        }
        anchor + delta * inv_n
    });
    Ok(out)
}

/// Averages the n stacked length-m slices of a length-d vector. Exactly
/// n-periodic input returns its first slice bit-for-bit.
pub fn fold_average<T: Real>(v: &[T], n: usize) -> Result<Vec<T>, CoreError> {
    if n == 0 {
        return Err(CoreError::Invalid("order must be at least 1".into()));
    }
    let d = v.len();
    if d % n != 0 {
        return Err(CoreError::OrderDoesNotDivide { n, d });
    }
    let m = d / n;
    let inv_n = T::one() / T::of(n as f64);
    Ok((0..m)
        .map(|i| {
            let anchor = v[i];
            let mut delta = T::zero();
            for k in 1..n {
                delta += v[i + m * k] - anchor;
            }
            anchor + delta * inv_n
        })
        .collect())
}
