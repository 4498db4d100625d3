//! Entropic solvers: the matrix-scaling iteration on the offset-summed
//! kernel for strictly symmetric problems, the classic iteration on dense
//! problems, and the two-stage warm start for approximately symmetric data.
//!
//! Scaled-domain updates are p <- alpha / (K q), q <- beta / (K^t p); after a
//! p-update the row marginals are exact, so the column residual is the
//! convergence monitor. It is checked every `check_every` iterations
//! starting with the first, so a warm start at the fixed point stops after
//! the check sweep. A log-domain variant of the same loop is available for
//! cost/lambda ratios that underflow the scaled kernel.

use std::fmt;
use std::time::Instant;

use crate::core::matrix::Mat;
use crate::core::metrics::{l2_distance, marginal_error, objective, row_marginal_error};
use crate::core::problem::{CoreError, CyclicProblem, DenseProblem, Phase, SolveReport, TransportPlan};
use crate::core::symmetry::fold_average;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub enum SinkhornError {
    BadParameter(String),
    /// A kernel entry underflowed to zero: the cost scale is too large for
    /// this lambda. Increase lambda or use the log-domain iteration.
    KernelUnderflow { max_cost_over_lambda: f64 },
    /// A matrix-vector product vanished under an active marginal entry.
    /// Increase lambda or use the log-domain iteration.
    ScalingUnderflow { index: usize },
    Core(CoreError),
}

impl fmt::Display for SinkhornError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SinkhornError::BadParameter(msg) => write!(f, "bad parameter: {msg}"),
            SinkhornError::KernelUnderflow { max_cost_over_lambda } => write!(
                f,
                "kernel entry underflowed to zero (max cost/lambda = {max_cost_over_lambda:.1}); \
                 increase lambda or enable the log-domain iteration"
            ),
            SinkhornError::ScalingUnderflow { index } => write!(
                f,
                "scaling product vanished at index {index}; increase lambda or enable the \
                 log-domain iteration"
            ),
            SinkhornError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for SinkhornError {}

impl From<CoreError> for SinkhornError {
    fn from(e: CoreError) -> Self {
        SinkhornError::Core(e)
    }
}

/// Positive kernel driving the scaling iteration. For the cyclic variant the
/// entries sum exp(-C_ijk / lambda) over the offset k and lie in (0, n]; for
/// the dense variant they are exp(-C_ij / lambda) in (0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsKernel<T> {
    matrix: Mat<T>,
    lambda: T,
    order: usize,
}

impl<T: Real> GibbsKernel<T> {
    pub fn matrix(&self) -> &Mat<T> {
        &self.matrix
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    /// Number of cyclic offsets summed into each entry (1 for dense kernels).
    pub fn order(&self) -> usize {
        self.order
    }
}

/// Scaling vectors p = exp(w / lambda), q = exp(z / lambda). Multiplying p by
/// a constant and dividing q by it leaves the plan unchanged; only the plan
/// is meaningful, not the individual vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingState<T> {
    pub p: Vec<T>,
    pub q: Vec<T>,
}

impl<T: Real> ScalingState<T> {
    pub fn ones(m: usize) -> Self {
        Self { p: vec![T::one(); m], q: vec![T::one(); m] }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornOptions<T> {
    /// Convergence tolerance on the l2 column residual of the iterated
    /// problem (the folded problem for the cyclic solver).
    pub tol: T,
    pub max_iters: usize,
    /// Check convergence on iterations 1, 1 + check_every, ...
    pub check_every: usize,
    /// Iterate in the log domain (slower, immune to kernel underflow).
    pub log_domain: bool,
}

impl<T: Real> Default for SinkhornOptions<T> {
    fn default() -> Self {
        Self { tol: T::of(1e-9), max_iters: 100_000, check_every: 10, log_domain: false }
    }
}

impl<T: Real> SinkhornOptions<T> {
    pub fn with_tol(tol: T) -> Self {
        Self { tol, ..Self::default() }
    }

    fn validate(&self) -> Result<(), SinkhornError> {
        if !(self.tol >= T::zero()) {
            return Err(SinkhornError::BadParameter("tol must be non-negative".into()));
        }
        if self.max_iters == 0 || self.check_every == 0 {
            return Err(SinkhornError::BadParameter(
                "max_iters and check_every must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn check_lambda<T: Real>(lambda: T) -> Result<(), SinkhornError> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(SinkhornError::BadParameter("lambda must be positive and finite".into()));
    }
    Ok(())
}

/// Kernel of the reduced problem: K_ij = sum_k exp(-C_ijk / lambda).
pub fn build_cyclic_kernel<T: Real>(
    problem: &CyclicProblem<T>,
    lambda: T,
) -> Result<GibbsKernel<T>, SinkhornError> {
    check_lambda(lambda)?;
    let m = problem.block_size();
    let mut matrix = Mat::zeros(m, m);
    for block in problem.cost_blocks() {
        for i in 0..m {
            for j in 0..m {
                matrix[(i, j)] += (-block[(i, j)] / lambda).exp();
            }
        }
    }
    ensure_positive(&matrix, problem.cost_blocks().iter().map(|b| b.iter()).flatten(), lambda)?;
    Ok(GibbsKernel { matrix, lambda, order: problem.order() })
}

/// Classic dense kernel K_ij = exp(-C_ij / lambda).
pub fn build_dense_kernel<T: Real>(
    cost: &Mat<T>,
    lambda: T,
) -> Result<GibbsKernel<T>, SinkhornError> {
    check_lambda(lambda)?;
    let matrix = cost.map(|c| (-c / lambda).exp());
    ensure_positive(&matrix, cost.iter(), lambda)?;
    Ok(GibbsKernel { matrix, lambda, order: 1 })
}

fn ensure_positive<'a, T: Real>(
    kernel: &Mat<T>,
    costs: impl Iterator<Item = &'a T>,
    lambda: T,
) -> Result<(), SinkhornError> {
    if kernel.iter().any(|&k| k <= T::zero()) {
        let max_cost = costs.fold(T::zero(), |acc, &c| acc.max(c));
        return Err(SinkhornError::KernelUnderflow {
            max_cost_over_lambda: (max_cost / lambda).to_f64().unwrap_or(f64::INFINITY),
        });
    }
    Ok(())
}

/// Values under this threshold in a scaling denominator abort the scaled
/// iteration; the log-domain path has no such hazard.
const UNDERFLOW_FLOOR: f64 = 1e-300;

struct LoopOutcome<T> {
    p: Vec<T>,
    q: Vec<T>,
    /// Log-domain duals (u, v) = (ln p, ln q) when iterating in log space.
    log: Option<(Vec<T>, Vec<T>)>,
    iterations: usize,
    converged: bool,
}

/// The shared update loop. Zero marginal entries freeze their scaling at
/// zero and never enter a division.
fn scaling_loop<T: Real>(
    kernel: &Mat<T>,
    alpha: &[T],
    beta: &[T],
    init: Option<&ScalingState<T>>,
    opts: &SinkhornOptions<T>,
) -> Result<LoopOutcome<T>, SinkhornError> {
    opts.validate()?;
    let m = alpha.len();
    let floor = underflow_floor::<T>();
    let mut q: Vec<T> = match init {
        Some(state) => state.q.clone(),
        None => vec![T::one(); m],
    };
    for (qj, &b) in q.iter_mut().zip(beta) {
        if b == T::zero() {
            *qj = T::zero();
        }
    }
    let mut p = vec![T::zero(); m];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iters {
        iterations = iter;
        let y = kernel.matvec(&q);
        for i in 0..m {
            if alpha[i] == T::zero() {
                p[i] = T::zero();
            } else {
                if y[i] < floor {
                    return Err(SinkhornError::ScalingUnderflow { index: i });
                }
                p[i] = alpha[i] / y[i];
            }
        }
        let x = kernel.tr_matvec(&p);
        if (iter - 1) % opts.check_every == 0 {
            let residual = column_residual(&q, &x, beta);
            if residual <= opts.tol {
                converged = true;
                break;
            }
        }
        for j in 0..m {
            if beta[j] == T::zero() {
                q[j] = T::zero();
            } else {
                if x[j] < floor {
                    return Err(SinkhornError::ScalingUnderflow { index: j });
                }
                q[j] = beta[j] / x[j];
            }
        }
    }
    Ok(LoopOutcome { p, q, log: None, iterations, converged })
}

fn underflow_floor<T: Real>() -> T {
    let t = T::of(UNDERFLOW_FLOOR);
    if t > T::zero() {
        t
    } else {
        T::min_positive_value()
    }
}

fn column_residual<T: Real>(q: &[T], kt_p: &[T], beta: &[T]) -> T {
    q.iter()
        .zip(kt_p)
        .zip(beta)
        .map(|((&qj, &xj), &bj)| {
            let diff = qj * xj - bj;
            diff * diff
        })
        .sum::<T>()
        .sqrt()
}

/// Log kernel of the reduced problem, log K_ij = LSE_k(-C_ijk / lambda):
/// immune to underflow for any cost scale.
fn cyclic_log_kernel<T: Real>(problem: &CyclicProblem<T>, lambda: T) -> Mat<T> {
    let m = problem.block_size();
    let mut scratch = Vec::with_capacity(problem.order());
    Mat::from_fn(m, m, |i, j| {
        logsumexp(
            problem.cost_blocks().iter().map(|b| -b[(i, j)] / lambda),
            &mut scratch,
        )
    })
}

/// Same iteration in the log domain: u = ln p, v = ln q, with log-sum-exp in
/// place of the matrix-vector products.
fn log_scaling_loop<T: Real>(
    log_kernel: &Mat<T>,
    alpha: &[T],
    beta: &[T],
    init: Option<&ScalingState<T>>,
    opts: &SinkhornOptions<T>,
) -> Result<LoopOutcome<T>, SinkhornError> {
    opts.validate()?;
    let m = alpha.len();
    let log_kernel = log_kernel;
    let ln_alpha: Vec<T> = alpha.iter().map(|&a| a.ln()).collect();
    let ln_beta: Vec<T> = beta.iter().map(|&b| b.ln()).collect();
    let mut v: Vec<T> = match init {
        Some(state) => state.q.iter().map(|&qj| qj.ln()).collect(),
        None => vec![T::zero(); m],
    };
    for (vj, &b) in v.iter_mut().zip(beta) {
        if b == T::zero() {
            *vj = T::neg_infinity();
        }
    }
    let mut u = vec![T::neg_infinity(); m];
    let mut row_scratch = vec![T::zero(); m];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 1..=opts.max_iters {
        iterations = iter;
        for i in 0..m {
            let lse = logsumexp((0..m).map(|j| log_kernel[(i, j)] + v[j]), &mut row_scratch);
            u[i] = ln_alpha[i] - lse;
        }
        // Column log-sums of diag(e^u) K.
        let mut col_lse = vec![T::neg_infinity(); m];
        let mut col_max = vec![T::neg_infinity(); m];
        for i in 0..m {
            for j in 0..m {
                col_max[j] = col_max[j].max(log_kernel[(i, j)] + u[i]);
            }
        }
        let mut col_acc = vec![T::zero(); m];
        for i in 0..m {
            for j in 0..m {
                if col_max[j].is_finite() {
                    col_acc[j] += (log_kernel[(i, j)] + u[i] - col_max[j]).exp();
                }
            }
        }
        for j in 0..m {
            col_lse[j] =
                if col_max[j].is_finite() { col_max[j] + col_acc[j].ln() } else { col_max[j] };
        }

        if (iter - 1) % opts.check_every == 0 {
            let residual = beta
                .iter()
                .enumerate()
                .map(|(j, &bj)| {
                    let col = (v[j] + col_lse[j]).exp();
                    let diff = col - bj;
                    diff * diff
                })
                .sum::<T>()
                .sqrt();
            if residual <= opts.tol {
                converged = true;
                break;
            }
        }
        for j in 0..m {
            v[j] = ln_beta[j] - col_lse[j];
        }
    }
    let p = u.iter().map(|&ui| ui.exp()).collect();
    let q = v.iter().map(|&vj| vj.exp()).collect();
    Ok(LoopOutcome { p, q, log: Some((u, v)), iterations, converged })
}

fn logsumexp<T: Real>(terms: impl Iterator<Item = T>, scratch: &mut Vec<T>) -> T {
    scratch.clear();
    let mut max = T::neg_infinity();
    for t in terms {
        max = max.max(t);
        scratch.push(t);
    }
    if !max.is_finite() {
        return max;
    }
    let sum: T = scratch.iter().map(|&t| (t - max).exp()).sum();
    max + sum.ln()
}

/// The scaling iteration on the reduced problem. Convergence is declared on
/// the folded column residual; the report carries the residuals and the
/// transport cost of the expanded plan, so it is comparable with the dense
/// solvers. Non-convergence is reported through `converged`, not an error.
pub fn cyclic_sinkhorn<T: Real>(
    problem: &CyclicProblem<T>,
    lambda: T,
    opts: &SinkhornOptions<T>,
) -> Result<(TransportPlan<T>, SolveReport<T>), SinkhornError> {
    check_lambda(lambda)?;
    let start = Instant::now();
    let (kernel_time, outcome) = if opts.log_domain {
        let log_kernel = cyclic_log_kernel(problem, lambda);
        let kernel_time = start.elapsed().as_secs_f64();
        let outcome =
            log_scaling_loop(&log_kernel, problem.alpha(), problem.beta(), None, opts)?;
        (kernel_time, outcome)
    } else {
        let kernel = build_cyclic_kernel(problem, lambda)?;
        let kernel_time = start.elapsed().as_secs_f64();
        let outcome =
            scaling_loop(kernel.matrix(), problem.alpha(), problem.beta(), None, opts)?;
        (kernel_time, outcome)
    };
    let loop_time = start.elapsed().as_secs_f64() - kernel_time;

    let m = problem.block_size();
    let n = problem.order();
    let blocks: Vec<Mat<T>> = match &outcome.log {
        None => problem
            .cost_blocks()
            .iter()
            .map(|c| {
                Mat::from_fn(m, m, |i, j| {
                    outcome.p[i] * outcome.q[j] * (-c[(i, j)] / lambda).exp()
                })
            })
            .collect(),
        Some((u, v)) => problem
            .cost_blocks()
            .iter()
            .map(|c| Mat::from_fn(m, m, |i, j| (u[i] + v[j] - c[(i, j)] / lambda).exp()))
            .collect(),
    };

    let transport: T = problem.cost_blocks().iter().zip(&blocks).map(|(c, t)| c.dot(t)).sum();
    let scale = T::of(n as f64).sqrt();
    let mut rows = vec![T::zero(); m];
    let mut cols = vec![T::zero(); m];
    for b in &blocks {
        for (acc, v) in rows.iter_mut().zip(b.row_sums()) {
            *acc += v;
        }
        for (acc, v) in cols.iter_mut().zip(b.col_sums()) {
            *acc += v;
        }
    }

    let mut report = SolveReport::new("csinkhorn");
    report.objective = T::of(n as f64) * transport;
    report.row_marginal_error = scale * l2_distance(&rows, problem.alpha());
    report.marginal_error = scale * l2_distance(&cols, problem.beta());
    report.iterations = outcome.iterations;
    report.converged = outcome.converged;
    report.wall_time = start.elapsed().as_secs_f64();
    report.phases = vec![
        Phase { label: "kernel".into(), seconds: kernel_time, iterations: 0 },
        Phase { label: "iterations".into(), seconds: loop_time, iterations: outcome.iterations },
        Phase {
            label: "reconstruct".into(),
            seconds: report.wall_time - kernel_time - loop_time,
            iterations: 0,
        },
    ];
    Ok((TransportPlan::Blocks(blocks), report))
}

/// The classic scaling iteration on a dense problem; `init` warm-starts the
/// scaling vectors (the q component seeds the first update).
pub fn sinkhorn<T: Real>(
    dense: &DenseProblem<T>,
    lambda: T,
    opts: &SinkhornOptions<T>,
    init: Option<&ScalingState<T>>,
) -> Result<(TransportPlan<T>, SolveReport<T>), SinkhornError> {
    check_lambda(lambda)?;
    let start = Instant::now();
    let d = dense.dim();
    // The same matrix serves as kernel (scaled path) or log kernel.
    let (kernel, is_log) = if opts.log_domain {
        (dense.cost().map(|c| -c / lambda), true)
    } else {
        (build_dense_kernel(dense.cost(), lambda)?.matrix().clone(), false)
    };
    let kernel_time = start.elapsed().as_secs_f64();

    let outcome = if is_log {
        log_scaling_loop(&kernel, dense.a(), dense.b(), init, opts)?
    } else {
        scaling_loop(&kernel, dense.a(), dense.b(), init, opts)?
    };
    let loop_time = start.elapsed().as_secs_f64() - kernel_time;

    let plan = match &outcome.log {
        Some((u, v)) => Mat::from_fn(d, d, |i, j| (u[i] + kernel[(i, j)] + v[j]).exp()),
        None => Mat::from_fn(d, d, |i, j| outcome.p[i] * kernel[(i, j)] * outcome.q[j]),
    };

    let mut report = SolveReport::new("sinkhorn");
    report.objective = objective(dense.cost(), &plan)?;
    report.row_marginal_error = row_marginal_error(&plan, dense.a())?;
    report.marginal_error = marginal_error(&plan, dense.b())?;
    report.iterations = outcome.iterations;
    report.converged = outcome.converged;
    report.wall_time = start.elapsed().as_secs_f64();
    report.phases = vec![
        Phase { label: "kernel".into(), seconds: kernel_time, iterations: 0 },
        Phase { label: "iterations".into(), seconds: loop_time, iterations: outcome.iterations },
        Phase {
            label: "reconstruct".into(),
            seconds: report.wall_time - kernel_time - loop_time,
            iterations: 0,
        },
    ];
    Ok((TransportPlan::Dense(plan), report))
}

/// Two-stage solve for approximately symmetric data: stage one folds the
/// marginals (averaging the n slices) and runs the reduced iteration to
/// `stage1_tol`; stage two runs the dense iteration from the n-concatenated
/// stage-one scalings to `opts.tol`. The cost matrix is taken as symmetric
/// at order n without verification, blocks read from the first block row.
pub fn two_stage_sinkhorn<T: Real>(
    dense: &DenseProblem<T>,
    n: usize,
    lambda: T,
    stage1_tol: T,
    opts: &SinkhornOptions<T>,
) -> Result<(TransportPlan<T>, SolveReport<T>), SinkhornError> {
    opts.validate()?;
    check_lambda(lambda)?;
    if n == 0 {
        return Err(SinkhornError::BadParameter("order must be at least 1".into()));
    }
    let d = dense.dim();
    if d % n != 0 {
        return Err(SinkhornError::Core(CoreError::OrderDoesNotDivide { n, d }));
    }
    if !(stage1_tol >= T::zero()) {
        return Err(SinkhornError::BadParameter("stage1_tol must be non-negative".into()));
    }
    let start = Instant::now();
    let m = d / n;

    // Stage 1: fold and iterate on the reduced problem.
    let alpha = fold_average(dense.a(), n)?;
    let beta = fold_average(dense.b(), n)?;
    let blocks: Vec<Mat<T>> =
        (0..n).map(|k| Mat::from_fn(m, m, |i, j| dense.cost()[(i, j + m * k)])).collect();
    let folded = CyclicProblem::new(alpha, beta, blocks)?;
    let stage1_opts = SinkhornOptions { tol: stage1_tol, ..opts.clone() };
    let stage1 = if opts.log_domain {
        let log_kernel = cyclic_log_kernel(&folded, lambda);
        log_scaling_loop(&log_kernel, folded.alpha(), folded.beta(), None, &stage1_opts)?
    } else {
        let kernel = build_cyclic_kernel(&folded, lambda)?;
        scaling_loop(kernel.matrix(), folded.alpha(), folded.beta(), None, &stage1_opts)?
    };
    let stage1_time = start.elapsed().as_secs_f64();

    // Stage 2: dense iteration warm-started from the tiled scalings.
    let tile = |v: &[T]| -> Vec<T> {
        let mut out = Vec::with_capacity(d);
        for _ in 0..n {
            out.extend_from_slice(v);
        }
        out
    };
    let warm = ScalingState { p: tile(&stage1.p), q: tile(&stage1.q) };
    let (plan, stage2_report) = sinkhorn(dense, lambda, opts, Some(&warm))?;
    let total_time = start.elapsed().as_secs_f64();

    let mut report = stage2_report;
    report.algorithm = "two-stage".into();
    report.iterations += stage1.iterations;
    report.wall_time = total_time;
    report.phases = vec![
        Phase { label: "stage1".into(), seconds: stage1_time, iterations: stage1.iterations },
        Phase {
            label: "stage2".into(),
            seconds: total_time - stage1_time,
            iterations: report.iterations - stage1.iterations,
        },
    ];
    Ok((plan, report))
}
