//! Cross-module properties: solver-vs-oracle equalities and the structural
//! invariants of the symmetry machinery.

use cyclic_ot::core::{
    block_marginal_errors, block_objective, expand, expand_plan, fold_average, marginal_error,
    objective, row_marginal_error, symmetrize, validate_cyclic, CyclicProblem, Mat,
};
use cyclic_ot::lot::{solve_lot, solve_lot_oracle};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn random_masses(rng: &mut ChaCha8Rng, m: usize, total: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.05).collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x * total / sum).collect()
}

fn random_cost(rng: &mut ChaCha8Rng, m: usize, scale: f64) -> Mat<f64> {
    Mat::from_fn(m, m, |_, _| rng.random::<f64>() * scale)
}

fn random_cyclic(rng: &mut ChaCha8Rng, m: usize, n: usize) -> CyclicProblem<f64> {
    let alpha = random_masses(rng, m, 1.0 / n as f64);
    let beta = random_masses(rng, m, 1.0 / n as f64);
    let blocks: Vec<Mat<f64>> = (0..n).map(|_| random_cost(rng, m, 10.0)).collect();
    CyclicProblem::new(alpha, beta, blocks).unwrap()
}

/// A random feasible plan for marginals (a, b): start from the product plan
/// and wander along circuit moves that keep both marginals intact.
fn random_feasible_plan(rng: &mut ChaCha8Rng, a: &[f64], b: &[f64]) -> Mat<f64> {
    let total: f64 = a.iter().sum();
    let mut t = Mat::from_fn(a.len(), b.len(), |i, j| a[i] * b[j] / total);
    let (rows, cols) = (t.rows(), t.cols());
    if rows < 2 || cols < 2 {
        return t;
    }
    for _ in 0..200 {
        let i1 = rng.random_range(0..rows);
        let i2 = rng.random_range(0..rows);
        let j1 = rng.random_range(0..cols);
        let j2 = rng.random_range(0..cols);
        if i1 == i2 || j1 == j2 {
            continue;
        }
        let cap = t[(i1, j1)].min(t[(i2, j2)]);
        let delta = rng.random::<f64>() * cap;
        t[(i1, j1)] -= delta;
        t[(i2, j2)] -= delta;
        t[(i1, j2)] += delta;
        t[(i2, j1)] += delta;
    }
    t
}

#[test]
fn simplex_matches_oracle_on_200_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for case in 0..200 {
        let m = rng.random_range(2..=8);
        let alpha = random_masses(&mut rng, m, 1.0);
        let beta = random_masses(&mut rng, m, 1.0);
        let cost = random_cost(&mut rng, m, 10.0);
        let a = solve_lot(&alpha, &beta, &cost).unwrap();
        let b = solve_lot_oracle(&alpha, &beta, &cost).unwrap();
        assert!(
            (a.value - b.value).abs() <= 1e-9,
            "case {case}: simplex {} vs oracle {}",
            a.value,
            b.value
        );
        let nonzeros = a.plan.iter().filter(|&&x| x > 1e-12).count();
        assert!(nonzeros <= 2 * m - 1, "case {case}: {nonzeros} nonzeros");
    }
}

#[test]
fn simplex_dual_certificate_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for _ in 0..50 {
        let m = rng.random_range(2..=8);
        let alpha = random_masses(&mut rng, m, 1.0);
        let beta = random_masses(&mut rng, m, 1.0);
        let cost = random_cost(&mut rng, m, 10.0);
        let sol = solve_lot(&alpha, &beta, &cost).unwrap();
        let dual_value: f64 = sol
            .potential_u
            .iter()
            .zip(&alpha)
            .map(|(u, a)| u * a)
            .chain(sol.potential_v.iter().zip(&beta).map(|(v, b)| v * b))
            .sum();
        assert!((dual_value - sol.value).abs() < 1e-9, "strong duality gap");
        for i in 0..m {
            for j in 0..m {
                let slack = cost[(i, j)] - sol.potential_u[i] - sol.potential_v[j];
                assert!(slack > -1e-9);
                if sol.plan[(i, j)] > 1e-12 {
                    assert!(slack.abs() < 1e-9);
                }
            }
        }
    }
}

#[test]
fn expand_then_validate_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..30 {
        let m = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let problem = random_cyclic(&mut rng, m, n);
        let dense = expand(&problem);
        let folded = validate_cyclic(&dense, n, 0.0).unwrap();
        assert_eq!(&folded, &problem, "fold must invert expand exactly");
    }
}

#[test]
fn fold_average_inverts_tiling_exactly() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..30 {
        let m = rng.random_range(1..=7);
        let n = rng.random_range(1..=6);
        let alpha: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let tiled: Vec<f64> = std::iter::repeat_with(|| alpha.clone()).take(n).flatten().collect();
        assert_eq!(fold_average(&tiled, n).unwrap(), alpha);
    }
}

#[test]
fn symmetrize_is_idempotent_and_circulant() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..40 {
        let m = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let d = m * n;
        let t = Mat::from_fn(d, d, |_, _| rng.random::<f64>());
        let s1 = symmetrize(&t, n).unwrap();
        let s2 = symmetrize(&s1, n).unwrap();
        assert!(s2.max_abs_diff(&s1) <= 1e-14, "idempotence failed");
        // Block-circulant check: block (r, s) equals block (0, (s - r) mod n).
        for r in 0..n {
            for s in 0..n {
                let k = (s + n - r) % n;
                for i in 0..m {
                    for j in 0..m {
                        let diff = (s1[(i + m * r, j + m * s)] - s1[(i, j + m * k)]).abs();
                        assert!(diff <= 1e-14, "not block-circulant at ({r},{s})");
                    }
                }
            }
        }
    }
}

#[test]
fn symmetrize_preserves_feasibility_and_linear_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..40 {
        let m = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let problem = random_cyclic(&mut rng, m, n);
        let dense = expand(&problem);
        let t = random_feasible_plan(&mut rng, dense.a(), dense.b());
        let s = symmetrize(&t, n).unwrap();

        // Feasibility is preserved: marginals are n-periodic here.
        assert!(row_marginal_error(&s, dense.a()).unwrap() < 1e-12);
        assert!(marginal_error(&s, dense.b()).unwrap() < 1e-12);
        assert!(s.iter().all(|&x| x >= -1e-15));

        // Linear objective is unchanged for a block-circulant cost, and an
        // entropic per-entry regularizer never increases (Jensen).
        let before = objective(dense.cost(), &t).unwrap();
        let after = objective(dense.cost(), &s).unwrap();
        assert!(
            (after - before).abs() <= 1e-11 * before.abs().max(1.0),
            "linear part moved: {before} -> {after}"
        );
        let ent = |m: &Mat<f64>| -> f64 {
            m.iter().map(|&x| if x > 0.0 { x * (x.ln() - 1.0) } else { 0.0 }).sum()
        };
        assert!(ent(&s) <= ent(&t) + 1e-12, "convex regularizer increased");
    }
}

#[test]
fn dense_objective_is_n_times_block_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..30 {
        let m = rng.random_range(1..=5);
        let n = rng.random_range(1..=6);
        let problem = random_cyclic(&mut rng, m, n);
        let blocks: Vec<Mat<f64>> = (0..n)
            .map(|_| Mat::from_fn(m, m, |_, _| rng.random::<f64>()))
            .collect();
        let small = block_objective(&problem, &blocks).unwrap();
        let dense_cost = expand(&problem);
        let dense_plan = expand_plan(&blocks).unwrap();
        let full = objective(dense_cost.cost(), &dense_plan).unwrap();
        assert!(
            (full - n as f64 * small).abs() <= 1e-12 * full.abs().max(1.0),
            "factor-n relation violated: {full} vs {} x {small}",
            n
        );
        let (row_err, col_err) = block_marginal_errors(&blocks, problem.alpha(), problem.beta())
            .unwrap();
        let a = expand(&problem);
        assert!((row_err - row_marginal_error(&dense_plan, a.a()).unwrap()).abs() < 1e-12);
        assert!((col_err - marginal_error(&dense_plan, a.b()).unwrap()).abs() < 1e-12);
    }
}
