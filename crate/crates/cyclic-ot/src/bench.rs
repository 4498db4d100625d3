//! Benchmark harness: runs algorithm suites over generated or loaded
//! instances, one solve at a time on one thread so timings stay honest, and
//! aggregates objective / marginal-error / time statistics per algorithm.
//! Records stream to JSON Lines; the summary lands in a CSV.

use std::fmt;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clot::solve_clot;
use crate::core::matrix::Mat;
use crate::core::problem::{CyclicProblem, DenseProblem, SolveReport};
use crate::core::symmetry::{expand, validate_cyclic};
use crate::datagen::{gen_counter_example, gen_synthetic, RngSpec};
use crate::io::{self, IoError, ProblemData};
use crate::lot::solve_lot;
use crate::sinkhorn::{cyclic_sinkhorn, sinkhorn, two_stage_sinkhorn, SinkhornOptions};
use crate::srot::{alternating_minimize, StandardRegularizer};

#[derive(Debug)]
pub enum BenchError {
    Config(String),
    Io(IoError),
    /// A sweep instance failed symmetry validation at a claimed divisor.
    Symmetry(String),
    /// Objectives across divisors disagreed beyond the tolerance.
    ObjectiveSpread { max_relative: f64, tolerance: f64 },
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Config(msg) => write!(f, "bad config: {msg}"),
            BenchError::Io(e) => write!(f, "{e}"),
            BenchError::Symmetry(msg) => write!(f, "symmetry validation failed: {msg}"),
            BenchError::ObjectiveSpread { max_relative, tolerance } => write!(
                f,
                "objectives disagree across divisors: relative spread {max_relative:.3e} \
                 exceeds {tolerance:.0e}"
            ),
        }
    }
}

impl std::error::Error for BenchError {}

impl From<IoError> for BenchError {
    fn from(e: IoError) -> Self {
        BenchError::Io(e)
    }
}

fn default_repetitions() -> usize {
    1
}

fn default_symmetry_tol() -> f64 {
    1e-9
}

/// Suite description, normally parsed from a JSON config file.
#[derive(Debug, Clone, Deserialize)]
pub struct BenchConfig {
    pub instances: Vec<InstanceSpec>,
    pub algorithms: Vec<AlgorithmSpec>,
    /// Timed repetitions per (instance, algorithm) pair.
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    /// Untimed warm-up solves before the repetitions.
    #[serde(default)]
    pub warmup: usize,
    /// Entrywise tolerance when folding dense instances to a divisor.
    #[serde(default = "default_symmetry_tol")]
    pub symmetry_tol: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InstanceSpec {
    /// Seeded random cyclic instances, one per seed.
    Synthetic {
        m: usize,
        n: usize,
        seeds: Vec<u64>,
        #[serde(default)]
        rng: Option<String>,
    },
    /// A problem document on disk.
    File { path: String },
    /// The cross-block family that defeats per-block solving.
    CounterExample { scale: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "algo", rename_all = "kebab-case")]
pub enum AlgorithmSpec {
    /// Direct network simplex on the dense problem.
    Lot,
    /// Reduced linear solve at divisor n.
    Clot { n: usize },
    /// Alternating dual minimization at divisor n.
    Amin {
        n: usize,
        reg: String,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_sweeps: Option<usize>,
    },
    /// Dense scaling iteration.
    Sinkhorn {
        lambda: f64,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iters: Option<usize>,
        #[serde(default)]
        log_domain: bool,
    },
    /// Reduced scaling iteration at divisor n.
    Csinkhorn {
        n: usize,
        lambda: f64,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iters: Option<usize>,
        #[serde(default)]
        log_domain: bool,
    },
    /// Two-stage warm-started iteration at order n.
    TwoStage {
        n: usize,
        lambda: f64,
        #[serde(default)]
        stage1_tol: Option<f64>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        max_iters: Option<usize>,
        #[serde(default)]
        log_domain: bool,
    },
}

impl AlgorithmSpec {
    /// Tag used for grouping records, stable even when a solve fails.
    pub fn tag(&self) -> String {
        match self {
            AlgorithmSpec::Lot => "lot".into(),
            AlgorithmSpec::Clot { .. } => "clot".into(),
            AlgorithmSpec::Amin { reg, .. } => format!("amin:{reg}"),
            AlgorithmSpec::Sinkhorn { .. } => "sinkhorn".into(),
            AlgorithmSpec::Csinkhorn { .. } => "csinkhorn".into(),
            AlgorithmSpec::TwoStage { .. } => "two-stage".into(),
        }
    }

    pub fn divisor(&self) -> usize {
        match self {
            AlgorithmSpec::Lot | AlgorithmSpec::Sinkhorn { .. } => 1,
            AlgorithmSpec::Clot { n }
            | AlgorithmSpec::Amin { n, .. }
            | AlgorithmSpec::Csinkhorn { n, .. }
            | AlgorithmSpec::TwoStage { n, .. } => *n,
        }
    }
}

/// One (instance, algorithm, n) outcome: the first timed run's report plus
/// every repetition's wall time, or the failure message.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRecord {
    pub instance: String,
    pub algorithm: String,
    pub n: usize,
    pub report: Option<SolveReport<f64>>,
    pub error: Option<String>,
    pub times: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SummaryRow {
    pub algorithm: String,
    pub n: usize,
    pub instances: usize,
    pub failures: usize,
    pub objective_mean: f64,
    pub objective_std: f64,
    pub marginal_error_mean: f64,
    pub marginal_error_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
}

#[derive(Debug)]
pub struct BenchOutcome {
    pub records: Vec<BenchRecord>,
    pub summary: Vec<SummaryRow>,
}

/// A materialized instance: the representation it came in, with the dense
/// expansion cached because several algorithms share it.
struct Instance {
    id: String,
    cyclic: Option<CyclicProblem<f64>>,
    dense: Option<DenseProblem<f64>>,
}

impl Instance {
    fn dense(&mut self) -> &DenseProblem<f64> {
        if self.dense.is_none() {
            let cyclic = self.cyclic.as_ref().expect("instance has a representation");
            self.dense = Some(expand(cyclic));
        }
        self.dense.as_ref().unwrap()
    }

    /// The instance folded at divisor n: reuses the native representation
    /// when the order matches, otherwise validates the dense expansion.
    fn cyclic_at(&mut self, n: usize, tol: f64) -> Result<CyclicProblem<f64>, BenchError> {
        if let Some(cyclic) = &self.cyclic {
            if cyclic.order() == n {
                return Ok(cyclic.clone());
            }
        }
        let dense = self.dense().clone();
        validate_cyclic(&dense, n, tol).map_err(|e| BenchError::Symmetry(e.to_string()))
    }
}

fn materialize(specs: &[InstanceSpec]) -> Result<Vec<Instance>, BenchError> {
    let mut out = Vec::new();
    for spec in specs {
        match spec {
            InstanceSpec::Synthetic { m, n, seeds, rng } => {
                if seeds.is_empty() {
                    return Err(BenchError::Config("synthetic spec needs seeds".into()));
                }
                let rng_spec: RngSpec = match rng {
                    Some(name) => name
                        .parse()
                        .map_err(|e| BenchError::Config(format!("{e}")))?,
                    None => RngSpec::default(),
                };
                for &seed in seeds {
                    let problem = gen_synthetic(*m, *n, seed, rng_spec)
                        .map_err(|e| BenchError::Config(e.to_string()))?;
                    out.push(Instance {
                        id: format!("synthetic-m{m}-n{n}-seed{seed}-{}", rng_spec.name()),
                        cyclic: Some(problem),
                        dense: None,
                    });
                }
            }
            InstanceSpec::File { path } => {
                let loaded = io::read_problem(path)?;
                let id = format!(
                    "file-{}",
                    Path::new(path).file_stem().map_or_else(
                        || path.clone(),
                        |s| s.to_string_lossy().into_owned()
                    )
                );
                match loaded.data {
                    ProblemData::Dense(p) => {
                        out.push(Instance { id, cyclic: None, dense: Some(p) })
                    }
                    ProblemData::Cyclic(p) => {
                        out.push(Instance { id, cyclic: Some(p), dense: None })
                    }
                }
            }
            InstanceSpec::CounterExample { scale } => {
                let problem = gen_counter_example(*scale)
                    .map_err(|e| BenchError::Config(e.to_string()))?;
                out.push(Instance {
                    id: format!("counter-example-{scale}"),
                    cyclic: Some(problem),
                    dense: None,
                });
            }
        }
    }
    Ok(out)
}

fn sinkhorn_opts(tol: Option<f64>, max_iters: Option<usize>, log_domain: bool) -> SinkhornOptions<f64> {
    let mut opts = SinkhornOptions::default();
    if let Some(tol) = tol {
        opts.tol = tol;
    }
    if let Some(max_iters) = max_iters {
        opts.max_iters = max_iters;
    }
    opts.log_domain = log_domain;
    opts
}

/// Runs one algorithm once against a materialized instance.
fn run_once(
    instance: &mut Instance,
    algorithm: &AlgorithmSpec,
    symmetry_tol: f64,
) -> Result<SolveReport<f64>, String> {
    match algorithm {
        AlgorithmSpec::Lot => {
            let dense = instance.dense();
            solve_lot(dense.a(), dense.b(), dense.cost())
                .map(|sol| sol.report)
                .map_err(|e| e.to_string())
        }
        AlgorithmSpec::Clot { n } => {
            let problem = instance.cyclic_at(*n, symmetry_tol).map_err(|e| e.to_string())?;
            solve_clot(&problem).map(|(_, report)| report).map_err(|e| e.to_string())
        }
        AlgorithmSpec::Amin { n, reg, tol, max_sweeps } => {
            let problem = instance.cyclic_at(*n, symmetry_tol).map_err(|e| e.to_string())?;
            let reg: StandardRegularizer<f64> = reg.parse().map_err(|e| format!("{e}"))?;
            alternating_minimize(
                &problem,
                &reg,
                tol.unwrap_or(1e-9),
                max_sweeps.unwrap_or(10_000),
            )
            .map(|out| out.report)
            .map_err(|e| e.to_string())
        }
        AlgorithmSpec::Sinkhorn { lambda, tol, max_iters, log_domain } => {
            let dense = instance.dense();
            sinkhorn(dense, *lambda, &sinkhorn_opts(*tol, *max_iters, *log_domain), None)
                .map(|(_, report)| report)
                .map_err(|e| e.to_string())
        }
        AlgorithmSpec::Csinkhorn { n, lambda, tol, max_iters, log_domain } => {
            let problem = instance.cyclic_at(*n, symmetry_tol).map_err(|e| e.to_string())?;
            cyclic_sinkhorn(&problem, *lambda, &sinkhorn_opts(*tol, *max_iters, *log_domain))
                .map(|(_, report)| report)
                .map_err(|e| e.to_string())
        }
        AlgorithmSpec::TwoStage { n, lambda, stage1_tol, tol, max_iters, log_domain } => {
            let dense = instance.dense();
            two_stage_sinkhorn(
                dense,
                *n,
                *lambda,
                stage1_tol.unwrap_or(1e-3),
                &sinkhorn_opts(*tol, *max_iters, *log_domain),
            )
            .map(|(_, report)| report)
            .map_err(|e| e.to_string())
        }
    }
}

/// Parses a config document.
pub fn parse_config(text: &str) -> Result<BenchConfig, BenchError> {
    serde_json::from_str(text).map_err(|e| BenchError::Config(e.to_string()))
}

/// Runs the whole suite: every algorithm against every instance, repetitions
/// timed after the warm-up runs, failures recorded rather than fatal.
pub fn run_suite(config: &BenchConfig) -> Result<BenchOutcome, BenchError> {
    if config.instances.is_empty() {
        return Err(BenchError::Config("need at least one instance".into()));
    }
    if config.algorithms.is_empty() {
        return Err(BenchError::Config("need at least one algorithm".into()));
    }
    if config.repetitions == 0 {
        return Err(BenchError::Config("repetitions must be at least 1".into()));
    }

    let mut instances = materialize(&config.instances)?;
    let mut records = Vec::new();
    for instance in instances.iter_mut() {
        for algorithm in &config.algorithms {
            for _ in 0..config.warmup {
                let _ = run_once(instance, algorithm, config.symmetry_tol);
            }
            let mut report = None;
            let mut error = None;
            let mut times = Vec::with_capacity(config.repetitions);
            for _ in 0..config.repetitions {
                match run_once(instance, algorithm, config.symmetry_tol) {
                    Ok(r) => {
                        times.push(r.wall_time);
                        if report.is_none() {
                            report = Some(r);
                        }
                    }
                    Err(e) => {
                        error = Some(e);
                        break;
                    }
                }
            }
            records.push(BenchRecord {
                instance: instance.id.clone(),
                algorithm: algorithm.tag(),
                n: algorithm.divisor(),
                report,
                error,
                times,
            });
        }
    }
    let summary = summarize(&records);
    Ok(BenchOutcome { records, summary })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Mean and sample standard deviation per (algorithm, n) over instances.
pub fn summarize(records: &[BenchRecord]) -> Vec<SummaryRow> {
    let mut keys: Vec<(String, usize)> = Vec::new();
    for r in records {
        let key = (r.algorithm.clone(), r.n);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.iter()
        .map(|(algorithm, n)| {
            let group: Vec<&BenchRecord> = records
                .iter()
                .filter(|r| &r.algorithm == algorithm && r.n == *n)
                .collect();
            let ok: Vec<&BenchRecord> = group.iter().copied().filter(|r| r.report.is_some()).collect();
            let objectives: Vec<f64> =
                ok.iter().map(|r| r.report.as_ref().unwrap().objective).collect();
            let marginals: Vec<f64> =
                ok.iter().map(|r| r.report.as_ref().unwrap().marginal_error).collect();
            let times: Vec<f64> = ok
                .iter()
                .map(|r| {
                    let (mean, _) = mean_std(&r.times);
                    mean
                })
                .collect();
            let (objective_mean, objective_std) = mean_std(&objectives);
            let (marginal_error_mean, marginal_error_std) = mean_std(&marginals);
            let (time_mean, time_std) = mean_std(&times);
            SummaryRow {
                algorithm: algorithm.clone(),
                n: *n,
                instances: group.len(),
                failures: group.len() - ok.len(),
                objective_mean,
                objective_std,
                marginal_error_mean,
                marginal_error_std,
                time_mean,
                time_std,
            }
        })
        .collect()
}

/// Which reduced algorithm a divisor sweep exercises.
#[derive(Debug, Clone)]
pub enum SweepAlgorithm {
    Clot,
    Csinkhorn { lambda: f64, opts: SinkhornOptions<f64> },
    Amin { reg: StandardRegularizer<f64>, tol: f64, max_sweeps: usize },
}

/// Tolerance on the relative objective spread across divisors.
pub const SWEEP_OBJECTIVE_TOL: f64 = 1e-6;

/// Runs the reduced algorithm at every divisor of `n_max` on a strictly
/// symmetric dense instance, verifying that the objective is independent of
/// the divisor (within [`SWEEP_OBJECTIVE_TOL`] relative).
pub fn divisor_sweep(
    dense: &DenseProblem<f64>,
    n_max: usize,
    algorithm: &SweepAlgorithm,
    symmetry_tol: f64,
) -> Result<Vec<BenchRecord>, BenchError> {
    if n_max == 0 {
        return Err(BenchError::Config("n_max must be at least 1".into()));
    }
    let divisors: Vec<usize> = (1..=n_max).filter(|k| n_max % k == 0).collect();
    let mut records = Vec::new();
    for &n in &divisors {
        let problem = validate_cyclic(dense, n, symmetry_tol)
            .map_err(|e| BenchError::Symmetry(format!("divisor {n}: {e}")))?;
        let report = match algorithm {
            SweepAlgorithm::Clot => {
                solve_clot(&problem).map(|(_, r)| r).map_err(|e| BenchError::Config(e.to_string()))?
            }
            SweepAlgorithm::Csinkhorn { lambda, opts } => cyclic_sinkhorn(&problem, *lambda, opts)
                .map(|(_, r)| r)
                .map_err(|e| BenchError::Config(e.to_string()))?,
            SweepAlgorithm::Amin { reg, tol, max_sweeps } => {
                alternating_minimize(&problem, reg, *tol, *max_sweeps)
                    .map(|out| out.report)
                    .map_err(|e| BenchError::Config(e.to_string()))?
            }
        };
        let time = report.wall_time;
        records.push(BenchRecord {
            instance: format!("sweep-d{}", dense.dim()),
            algorithm: report.algorithm.clone(),
            n,
            report: Some(report),
            error: None,
            times: vec![time],
        });
    }

    let objectives: Vec<f64> =
        records.iter().map(|r| r.report.as_ref().unwrap().objective).collect();
    let max = objectives.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = objectives.iter().cloned().fold(f64::INFINITY, f64::min);
    let scale = objectives.iter().fold(0.0f64, |a, &b| a.max(b.abs())).max(f64::MIN_POSITIVE);
    let max_relative = (max - min) / scale;
    if max_relative > SWEEP_OBJECTIVE_TOL {
        return Err(BenchError::ObjectiveSpread {
            max_relative,
            tolerance: SWEEP_OBJECTIVE_TOL,
        });
    }
    Ok(records)
}

pub fn write_records_jsonl(
    path: impl AsRef<Path>,
    records: &[BenchRecord],
) -> Result<(), BenchError> {
    let mut file = std::fs::File::create(path).map_err(|e| BenchError::Io(e.into()))?;
    for record in records {
        let line = serde_json::to_string(record)
            .map_err(|e| BenchError::Config(format!("serialize record: {e}")))?;
        writeln!(file, "{line}").map_err(|e| BenchError::Io(e.into()))?;
    }
    Ok(())
}

pub fn write_summary_csv(
    path: impl AsRef<Path>,
    summary: &[SummaryRow],
) -> Result<(), BenchError> {
    let mut out = String::from(
        "algorithm,n,instances,failures,objective_mean,objective_std,\
         marginal_error_mean,marginal_error_std,time_mean,time_std\n",
    );
    for row in summary {
        out.push_str(&format!(
            "{},{},{},{},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.9e}\n",
            row.algorithm,
            row.n,
            row.instances,
            row.failures,
            row.objective_mean,
            row.objective_std,
            row.marginal_error_mean,
            row.marginal_error_std,
            row.time_mean,
            row.time_std,
        ));
    }
    std::fs::write(path, out).map_err(|e| BenchError::Io(e.into()))?;
    Ok(())
}
