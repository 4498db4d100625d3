//! Strongly convex regularized transport through the reduced Fenchel dual:
//! 2m dual variables regardless of the symmetry order, optimized by
//! coordinate-exact alternating sweeps with safeguarded Newton inner solves,
//! and the primal plan reconstructed from the conjugate derivative.

mod regularizer;

pub use regularizer::{Entropic, Regularizer, Squared, StandardRegularizer};

use std::fmt;
use std::time::Instant;

use crate::core::matrix::Mat;
use crate::core::metrics::block_marginal_errors;
use crate::core::problem::{CoreError, CyclicProblem, SolveReport, TransportPlan};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum SrotError {
    BadParameter(String),
    /// Sign-change bracket for a coordinate root was not found within the
    /// expansion limit; the regularizer's derivative cannot balance the
    /// marginal (e.g. a zero or negative marginal entry).
    BracketNotFound { coordinate: char, index: usize },
    /// A marginal entry is zero or negative; the dual coordinate would
    /// diverge.
    NonpositiveMarginal { which: char, index: usize },
    NonFinite(String),
    Core(CoreError),
}

impl fmt::Display for SrotError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SrotError::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
            SrotError::BracketNotFound { coordinate, index } => {
                write!(f, "no sign-change bracket for {coordinate}[{index}]")
            }
            SrotError::NonpositiveMarginal { which, index } => {
                write!(f, "marginal {which}[{index}] must be positive for the dual solver")
            }
            SrotError::NonFinite(msg) => write!(f, "non-finite value: {msg}"),
            SrotError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SrotError {}

impl From<CoreError> for SrotError {
    fn from(e: CoreError) -> Self {
        SrotError::Core(e)
    }
}

/// The 2m dual variables of the reduced dual problem.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState<T> {
    pub w: Vec<T>,
    pub z: Vec<T>,
}

impl<T: Real> DualState<T> {
    pub fn zeros(m: usize) -> Self {
        Self { w: vec![T::zero(); m], z: vec![T::zero(); m] }
    }

    pub fn is_finite(&self) -> bool {
        self.w.iter().chain(&self.z).all(|x| x.is_finite())
    }
}

/// Dual objective <w, alpha> + <z, beta> - sum_k sum_ij phi*(w_i + z_j - C_ijk).
pub fn dual_objective<T: Real, R: Regularizer<T>>(
    state: &DualState<T>,
    problem: &CyclicProblem<T>,
    reg: &R,
) -> T {
    let m = problem.block_size();
    debug_assert_eq!(state.w.len(), m);
    debug_assert_eq!(state.z.len(), m);
    let linear: T = state
        .w
        .iter()
        .zip(problem.alpha())
        .map(|(&w, &a)| w * a)
        .chain(state.z.iter().zip(problem.beta()).map(|(&z, &b)| z * b))
        .sum();
    let mut conj = T::zero();
    for block in problem.cost_blocks() {
        for i in 0..m {
            let wi = state.w[i];
            for j in 0..m {
                conj += reg.conjugate(wi + state.z[j] - block[(i, j)]);
            }
        }
    }
    linear - conj
}

/// Partial derivative of the dual objective in w_i:
/// alpha_i - sum_k sum_j (phi*)'(w_i + z_j - C_ijk). Non-increasing in w_i.
pub fn partial_w<T: Real, R: Regularizer<T>>(
    i: usize,
    state: &DualState<T>,
    problem: &CyclicProblem<T>,
    reg: &R,
) -> T {
    problem.alpha()[i] - row_mass(state.w[i], i, &state.z, problem, reg)
}

/// Partial derivative in z_j, by symmetry.
pub fn partial_z<T: Real, R: Regularizer<T>>(
    j: usize,
    state: &DualState<T>,
    problem: &CyclicProblem<T>,
    reg: &R,
) -> T {
    problem.beta()[j] - col_mass(state.z[j], j, &state.w, problem, reg)
}

/// Row mass sum_k sum_j (phi*)'(w + z_j - C_ijk) of reconstructed row i.
fn row_mass<T: Real, R: Regularizer<T>>(
    w: T,
    i: usize,
    z: &[T],
    problem: &CyclicProblem<T>,
    reg: &R,
) -> T {
    let mut total = T::zero();
    for block in problem.cost_blocks() {
        for (j, &zj) in z.iter().enumerate() {
            total += reg.conjugate_derivative(w + zj - block[(i, j)]);
        }
    }
    total
}

fn col_mass<T: Real, R: Regularizer<T>>(
    z: T,
    j: usize,
    w: &[T],
    problem: &CyclicProblem<T>,
    reg: &R,
) -> T {
    let mut total = T::zero();
    for block in problem.cost_blocks() {
        for (i, &wi) in w.iter().enumerate() {
            total += reg.conjugate_derivative(wi + z - block[(i, j)]);
        }
    }
    total
}

const MAX_BRACKET_EXPANSIONS: usize = 80;
const MAX_NEWTON_ITERS: usize = 100;

/// Finds the w_i with |partial_w| <= tol, holding everything else fixed:
/// doubling bracket expansion around the current value, then Newton steps
/// with bisection whenever a step leaves the bracket.
pub fn coordinate_solve_w<T: Real, R: Regularizer<T>>(
    i: usize,
    state: &DualState<T>,
    problem: &CyclicProblem<T>,
    reg: &R,
    tol: T,
) -> Result<T, SrotError> {
    let g = |w: T| problem.alpha()[i] - row_mass(w, i, &state.z, problem, reg);
    let dg = |w: T| -> T {
        let mut total = T::zero();
        for block in problem.cost_blocks() {
            for (j, &zj) in state.z.iter().enumerate() {
                total += reg.conjugate_second(w + zj - block[(i, j)]);
            }
        }
        -total
    };
    monotone_root(g, dg, state.w[i], tol)
        .ok_or(SrotError::BracketNotFound { coordinate: 'w', index: i })
}

/// Finds the z_j with |partial_z| <= tol, holding everything else fixed.
pub fn coordinate_solve_z<T: Real, R: Regularizer<T>>(
    j: usize,
    state: &DualState<T>,
    problem: &CyclicProblem<T>,
    reg: &R,
    tol: T,
) -> Result<T, SrotError> {
    let g = |z: T| problem.beta()[j] - col_mass(z, j, &state.w, problem, reg);
    let dg = |z: T| -> T {
        let mut total = T::zero();
        for block in problem.cost_blocks() {
            for (i, &wi) in state.w.iter().enumerate() {
                total += reg.conjugate_second(wi + z - block[(i, j)]);
            }
        }
        -total
    };
    monotone_root(g, dg, state.z[j], tol)
        .ok_or(SrotError::BracketNotFound { coordinate: 'z', index: j })
}

/// Root of a non-increasing function g: bracket [x0 - 1, x0 + 1] grown by
/// doubling until the sign flips, then safeguarded Newton.
fn monotone_root<T: Real>(
    g: impl Fn(T) -> T,
    dg: impl Fn(T) -> T,
    x0: T,
    tol: T,
) -> Option<T> {
    let gx0 = g(x0);
    if gx0.abs() <= tol {
        return Some(x0);
    }

    // g decreasing: g > 0 means the root lies to the right.
    let mut width = T::one();
    let (mut lo, mut hi) = if gx0 > T::zero() { (x0, x0 + width) } else { (x0 - width, x0) };
    let mut expansions = 0;
    loop {
        let edge = if gx0 > T::zero() { g(hi) } else { g(lo) };
        if edge.is_nan() {
            return None;
        }
        let flipped = if gx0 > T::zero() { edge <= T::zero() } else { edge >= T::zero() };
        if flipped {
            break;
        }
        expansions += 1;
        if expansions > MAX_BRACKET_EXPANSIONS {
            return None;
        }
        width = width + width;
        if gx0 > T::zero() {
            lo = hi;
            hi = hi + width;
        } else {
            hi = lo;
            lo = lo - width;
        }
    }

    let mut x = (lo + hi) / T::of(2.0);
    for _ in 0..MAX_NEWTON_ITERS {
        let fx = g(x);
        if fx.abs() <= tol {
            return Some(x);
        }
        if fx > T::zero() {
            lo = x;
        } else {
            hi = x;
        }
        let slope = dg(x);
        let step_ok = slope.is_finite() && slope < T::zero();
        let mut next = if step_ok { x - fx / slope } else { x };
        if !step_ok || !next.is_finite() || next <= lo || next >= hi {
            next = (lo + hi) / T::of(2.0);
        }
        x = next;
    }
    Some(x)
}

/// Reconstructs the block plan T_k[i][j] = (phi*)'(w_i + z_j - C_ijk).
pub fn primal_from_dual<T: Real, R: Regularizer<T>>(
    state: &DualState<T>,
    problem: &CyclicProblem<T>,
    reg: &R,
) -> TransportPlan<T> {
    let m = problem.block_size();
    let blocks = problem
        .cost_blocks()
        .iter()
        .map(|block| {
            Mat::from_fn(m, m, |i, j| {
                reg.conjugate_derivative(state.w[i] + state.z[j] - block[(i, j)])
            })
        })
        .collect();
    TransportPlan::Blocks(blocks)
}

/// Reduced-problem regularized objective sum_k <C_k, T_k> + sum phi(T_ijk);
/// pair it with [`dual_objective`] to measure the duality gap.
pub fn primal_objective<T: Real, R: Regularizer<T>>(
    problem: &CyclicProblem<T>,
    blocks: &[Mat<T>],
    reg: &R,
) -> T {
    let mut total = T::zero();
    for (c, t) in problem.cost_blocks().iter().zip(blocks) {
        total += c.dot(t);
        total += t.iter().map(|&x| reg.primal(x)).sum::<T>();
    }
    total
}

/// Everything the alternating solver produces: the dual state, the
/// reconstructed plan, the report, and the dual objective after each sweep
/// (non-decreasing; exposed so monotonicity is checkable).
#[derive(Debug, Clone)]
pub struct AminOutcome<T> {
    pub state: DualState<T>,
    pub plan: TransportPlan<T>,
    pub report: SolveReport<T>,
    pub dual_values: Vec<T>,
}

/// Alternating minimization on the reduced dual: exact coordinate sweeps over
/// w given z, then z given w (Gauss-Seidel), until the reconstructed plan's
/// marginal residuals (at full-problem scale) drop to `tol`.
pub fn alternating_minimize<T: Real, R: Regularizer<T>>(
    problem: &CyclicProblem<T>,
    reg: &R,
    tol: T,
    max_sweeps: usize,
) -> Result<AminOutcome<T>, SrotError> {
    if !(tol > T::zero()) {
        return Err(SrotError::BadParameter("tol must be positive".into()));
    }
    for (which, v) in [('a', problem.alpha()), ('b', problem.beta())] {
        if let Some(index) = v.iter().position(|x| !(*x > T::zero())) {
            return Err(SrotError::NonpositiveMarginal { which, index });
        }
    }
    let start = Instant::now();
    let m = problem.block_size();
    let n = problem.order();
    // Coordinate residuals add up over a block row/column; keep the inner
    // tolerance a safe factor below the sweep-level target.
    let inner_tol = tol / (T::of(10.0) * T::of((m * n) as f64).sqrt());

    let mut state = DualState::zeros(m);
    let mut dual_values = Vec::new();
    let mut converged = false;
    let mut sweeps = 0;
    let mut row_err = T::infinity();
    let mut col_err = T::infinity();
    let mut blocks: Vec<Mat<T>> = Vec::new();

    while sweeps < max_sweeps {
        sweeps += 1;
        for i in 0..m {
            state.w[i] = coordinate_solve_w(i, &state, problem, reg, inner_tol)?;
        }
        for j in 0..m {
            state.z[j] = coordinate_solve_z(j, &state, problem, reg, inner_tol)?;
        }
        dual_values.push(dual_objective(&state, problem, reg));

        let plan = primal_from_dual(&state, problem, reg);
        blocks = match plan {
            TransportPlan::Blocks(b) => b,
            TransportPlan::Dense(_) => unreachable!(),
        };
        (row_err, col_err) = block_marginal_errors(&blocks, problem.alpha(), problem.beta())?;
        if row_err.max(col_err) <= tol {
            converged = true;
            break;
        }
    }

    let transport: T = problem
        .cost_blocks()
        .iter()
        .zip(&blocks)
        .map(|(c, t)| c.dot(t))
        .sum();
    let mut report = SolveReport::new(format!("amin:{}", reg.tag()));
    report.objective = T::of(n as f64) * transport;
    report.row_marginal_error = row_err;
    report.marginal_error = col_err;
    report.iterations = sweeps;
    report.converged = converged;
    report.wall_time = start.elapsed().as_secs_f64();
    Ok(AminOutcome { state, plan: TransportPlan::Blocks(blocks), report, dual_values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn small_problem() -> CyclicProblem<f64> {
        CyclicProblem::new(
            vec![0.2, 0.3],
            vec![0.25, 0.25],
            vec![
                Mat::from_rows(&[vec![0.3, 1.1], vec![0.8, 0.2]]),
                Mat::from_rows(&[vec![1.4, 0.5], vec![0.6, 0.9]]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn dual_objective_closed_form_at_origin() {
        let problem = small_problem();
        let lambda = 0.8;
        let reg = Entropic::new(lambda).unwrap();
        let state = DualState::zeros(2);
        let expected: f64 = -lambda
            * problem
                .cost_blocks()
                .iter()
                .flat_map(|b| b.iter())
                .map(|&c| (-c / lambda).exp())
                .sum::<f64>();
        let got = dual_objective(&state, &problem, &reg);
        assert!((got - expected).abs() < 1e-14);

        let single = CyclicProblem::new(
            vec![1.0_f64],
            vec![1.0_f64],
            vec![Mat::from_rows(&[vec![0.0]])],
        )
        .unwrap();
        let reg = Entropic::new(1.0).unwrap();
        assert!((dual_objective(&DualState::zeros(1), &single, &reg) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn dual_objective_has_translation_gauge() {
        let problem = small_problem();
        let reg = Entropic::new(0.6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = DualState {
            w: (0..2).map(|_| rng.random::<f64>() - 0.5).collect(),
            z: (0..2).map(|_| rng.random::<f64>() - 0.5).collect(),
        };
        let base = dual_objective(&state, &problem, &reg);
        for c in [-0.7, 0.3, 2.0] {
            let shifted = DualState {
                w: state.w.iter().map(|w| w + c).collect(),
                z: state.z.iter().map(|z| z - c).collect(),
            };
            let got = dual_objective(&shifted, &problem, &reg);
            assert!((got - base).abs() < 1e-12, "gauge violated at c = {c}");
        }
    }

    #[test]
    fn partials_match_entropic_closed_form() {
        let problem = small_problem();
        let lambda = 0.9;
        let reg = Entropic::new(lambda).unwrap();
        let state = DualState { w: vec![0.3, -0.2], z: vec![0.1, 0.4] };
        // alpha_i - exp(w_i/lambda) sum_j K_ij exp(z_j/lambda), K from the
        // offset-summed Gibbs kernel.
        for i in 0..2 {
            let mut acc = 0.0;
            for j in 0..2 {
                let k_ij: f64 = problem
                    .cost_blocks()
                    .iter()
                    .map(|b| (-b[(i, j)] / lambda).exp())
                    .sum();
                acc += k_ij * (state.z[j] / lambda).exp();
            }
            let expected = problem.alpha()[i] - (state.w[i] / lambda).exp() * acc;
            let got = partial_w(i, &state, &problem, &reg);
            assert!((got - expected).abs() < 1e-13);
        }
    }

    #[test]
    fn partials_match_finite_differences() {
        let problem = small_problem();
        let h = 1e-5;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let regs: Vec<StandardRegularizer<f64>> = vec![
            StandardRegularizer::Entropic(Entropic::new(0.7).unwrap()),
            StandardRegularizer::Squared(Squared::new(1.2).unwrap()),
        ];
        for reg in &regs {
            for _ in 0..20 {
                let state = DualState {
                    w: (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
                    z: (0..2).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
                };
                for i in 0..2 {
                    let mut plus = state.clone();
                    plus.w[i] += h;
                    let mut minus = state.clone();
                    minus.w[i] -= h;
                    let fd = (dual_objective(&plus, &problem, reg)
                        - dual_objective(&minus, &problem, reg))
                        / (2.0 * h);
                    let got = partial_w(i, &state, &problem, reg);
                    let tol = 1e-6 * got.abs().max(1.0);
                    assert!((fd - got).abs() <= tol, "{}: fd {fd} vs {got}", reg.tag());
                }
            }
        }
    }

    #[test]
    fn coordinate_solve_matches_entropic_closed_form() {
        let problem = small_problem();
        let lambda = 0.75;
        let reg = Entropic::new(lambda).unwrap();
        let state = DualState { w: vec![0.0, 0.0], z: vec![0.2, -0.3] };
        for i in 0..2 {
            let got = coordinate_solve_w(i, &state, &problem, &reg, 1e-14).unwrap();
            let mut denom = 0.0;
            for j in 0..2 {
                let k_ij: f64 = problem
                    .cost_blocks()
                    .iter()
                    .map(|b| (-b[(i, j)] / lambda).exp())
                    .sum();
                denom += k_ij * (state.z[j] / lambda).exp();
            }
            let closed = lambda * (problem.alpha()[i].ln() - denom.ln());
            assert!((got - closed).abs() < 1e-10, "w[{i}]: {got} vs {closed}");
        }
    }

    #[test]
    fn coordinate_solve_squared_unit_case() {
        // g(w) = 1 - max(w, 0) = 0 at w = 1.
        let problem = CyclicProblem::new(
            vec![1.0_f64],
            vec![1.0_f64],
            vec![Mat::from_rows(&[vec![0.0]])],
        )
        .unwrap();
        let reg = Squared::new(1.0).unwrap();
        let state = DualState::zeros(1);
        let w = coordinate_solve_w(0, &state, &problem, &reg, 1e-12).unwrap();
        assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn entropic_mass_scaling_shifts_w_by_lambda_log_t() {
        // The row coordinate only sees its own alpha_i, so scaling alpha_0 by
        // t while holding z and the costs must shift w_0 by lambda log t.
        let lambda = 0.6_f64;
        let reg = Entropic::new(lambda).unwrap();
        let state = DualState { w: vec![0.0_f64, 0.0], z: vec![0.45, -0.3] };
        let blocks = vec![
            Mat::from_rows(&[vec![0.9, 0.3], vec![0.5, 0.1]]),
            Mat::from_rows(&[vec![0.4, 0.8], vec![0.2, 0.7]]),
        ];
        let t = 3.0_f64;
        let base = CyclicProblem::new(vec![0.1, 0.4], vec![0.25, 0.25], blocks.clone()).unwrap();
        let scaled =
            CyclicProblem::new(vec![0.1 * t, 0.4 - 0.2], vec![0.25, 0.25], blocks).unwrap();
        let w0 = coordinate_solve_w(0, &state, &base, &reg, 1e-14).unwrap();
        let wt = coordinate_solve_w(0, &state, &scaled, &reg, 1e-14).unwrap();
        assert!((wt - (w0 + lambda * t.ln())).abs() < 1e-10);
    }

    #[test]
    fn bracket_failure_is_reported() {
        struct Flat;
        impl Regularizer<f64> for Flat {
            fn primal(&self, _x: f64) -> f64 {
                0.0
            }
            fn conjugate(&self, _y: f64) -> f64 {
                0.0
            }
            fn conjugate_derivative(&self, _y: f64) -> f64 {
                0.0
            }
            fn modulus(&self) -> f64 {
                1.0
            }
            fn tag(&self) -> String {
                "flat".into()
            }
        }
        let problem = CyclicProblem::new(
            vec![1.0_f64],
            vec![1.0_f64],
            vec![Mat::from_rows(&[vec![0.0]])],
        )
        .unwrap();
        let state = DualState::zeros(1);
        assert!(matches!(
            coordinate_solve_w(0, &state, &problem, &Flat, 1e-9),
            Err(SrotError::BracketNotFound { coordinate: 'w', index: 0 })
        ));
    }

    #[test]
    fn constant_cost_uniform_marginals_converges_immediately() {
        let m = 3;
        let n = 2;
        let uniform = vec![1.0 / (m * n) as f64; m];
        let blocks = vec![Mat::from_fn(m, m, |_, _| 2.0); n];
        let problem = CyclicProblem::new(uniform.clone(), uniform, blocks).unwrap();
        let reg = Entropic::new(0.5).unwrap();
        let out = alternating_minimize(&problem, &reg, 1e-10, 100).unwrap();
        assert!(out.report.converged);
        assert_eq!(out.report.iterations, 1);
        assert!(out.report.marginal_error < 1e-10);
        let blocks = out.plan.as_blocks().unwrap();
        let first = blocks[0][(0, 0)];
        assert!(blocks.iter().all(|b| b.iter().all(|&x| (x - first).abs() < 1e-12)));
    }

    #[test]
    fn dual_ascent_is_monotone_and_stationary_at_convergence() {
        let problem = small_problem();
        let reg = Entropic::new(0.4).unwrap();
        let out = alternating_minimize(&problem, &reg, 1e-11, 500).unwrap();
        assert!(out.report.converged);
        for pair in out.dual_values.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "dual objective decreased: {pair:?}");
        }
        for i in 0..2 {
            assert!(partial_w(i, &out.state, &problem, &reg).abs() < 1e-9);
        }
        for j in 0..2 {
            assert!(partial_z(j, &out.state, &problem, &reg).abs() < 1e-9);
        }
        // Stationarity implies feasibility of the reconstructed rows.
        let blocks = out.plan.as_blocks().unwrap();
        let mut row = vec![0.0; 2];
        for b in blocks {
            for (acc, v) in row.iter_mut().zip(b.row_sums()) {
                *acc += v;
            }
        }
        for (r, a) in row.iter().zip(problem.alpha()) {
            assert!((r - a).abs() <= 1e-9);
        }
    }

    #[test]
    fn squared_regularizer_matches_projection_oracle() {
        // With phi = x^2 / (2 gamma), the optimum is the Euclidean projection
        // of -gamma * C onto the feasible set; Dykstra's alternating
        // projections give an independent reference.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..5 {
            let m = 2;
            let n = 2;
            let gamma = 0.8;
            let alpha: Vec<f64> = {
                let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.2).collect();
                let s: f64 = raw.iter().sum::<f64>() * n as f64;
                raw.into_iter().map(|x| x / s).collect()
            };
            let beta: Vec<f64> = {
                let raw: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + 0.2).collect();
                let s: f64 = raw.iter().sum::<f64>() * n as f64;
                raw.into_iter().map(|x| x / s).collect()
            };
            let blocks: Vec<Mat<f64>> = (0..n)
                .map(|_| Mat::from_fn(m, m, |_, _| rng.random::<f64>() * 0.05))
                .collect();
            let problem =
                CyclicProblem::new(alpha.clone(), beta.clone(), blocks.clone()).unwrap();
            let reg = Squared::new(gamma).unwrap();
            let out = alternating_minimize(&problem, &reg, 1e-11, 2000).unwrap();
            assert!(out.report.converged);

            let oracle = dykstra_projection(&problem, gamma);
            let primal_solver =
                primal_objective(&problem, out.plan.as_blocks().unwrap(), &reg);
            let primal_oracle = primal_objective(&problem, &oracle, &reg);
            assert!(
                (primal_solver - primal_oracle).abs() <= 1e-6,
                "solver {primal_solver} vs oracle {primal_oracle}"
            );
        }
    }

    /// Dykstra's alternating projections onto {row sums = alpha},
    /// {col sums = beta}, {T >= 0}, applied to -gamma C. The quadratic
    /// problem's optimum is exactly this projection.
    fn dykstra_projection(problem: &CyclicProblem<f64>, gamma: f64) -> Vec<Mat<f64>> {
        let m = problem.block_size();
        let n = problem.order();
        let dims = n * m * m;
        let idx = |k: usize, i: usize, j: usize| k * m * m + i * m + j;

        let mut x = vec![0.0f64; dims];
        for k in 0..n {
            for i in 0..m {
                for j in 0..m {
                    x[idx(k, i, j)] = -gamma * problem.block(k)[(i, j)];
                }
            }
        }
        let mut p = vec![0.0f64; dims];
        let mut q = vec![0.0f64; dims];
        let mut r = vec![0.0f64; dims];
        let mut y = vec![0.0f64; dims];

        for _ in 0..20000 {
            // Rows: each i couples all (k, j) entries.
            for (yv, (xv, pv)) in y.iter_mut().zip(x.iter().zip(&p)) {
                *yv = xv + pv;
            }
            for i in 0..m {
                let total: f64 = (0..n).flat_map(|k| (0..m).map(move |j| (k, j)))
                    .map(|(k, j)| y[idx(k, i, j)])
                    .sum();
                let adjust = (problem.alpha()[i] - total) / (n * m) as f64;
                for k in 0..n {
                    for j in 0..m {
                        let id = idx(k, i, j);
                        let projected = y[id] + adjust;
                        p[id] = y[id] - projected;
                        x[id] = projected;
                    }
                }
            }
            // Columns.
            for (yv, (xv, qv)) in y.iter_mut().zip(x.iter().zip(&q)) {
                *yv = xv + qv;
            }
            for j in 0..m {
                let total: f64 = (0..n).flat_map(|k| (0..m).map(move |i| (k, i)))
                    .map(|(k, i)| y[idx(k, i, j)])
                    .sum();
                let adjust = (problem.beta()[j] - total) / (n * m) as f64;
                for k in 0..n {
                    for i in 0..m {
                        let id = idx(k, i, j);
                        let projected = y[id] + adjust;
                        q[id] = y[id] - projected;
                        x[id] = projected;
                    }
                }
            }
            // Non-negative orthant.
            for id in 0..dims {
                let yv = x[id] + r[id];
                let projected = yv.max(0.0);
                r[id] = yv - projected;
                x[id] = projected;
            }
        }

        (0..n)
            .map(|k| Mat::from_fn(m, m, |i, j| x[idx(k, i, j)]))
            .collect()
    }
}
