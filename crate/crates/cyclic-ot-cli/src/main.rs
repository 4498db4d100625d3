//! Command-line front end: generate problem instances, solve them with any
//! of the direct or reduced algorithms, validate claimed symmetry, and run
//! benchmark suites.

use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cyclic_ot::bench::{run_suite, write_records_jsonl, write_summary_csv, BenchConfig};
use cyclic_ot::core::{expand, validate_cyclic, SolveReport, TransportPlan};
use cyclic_ot::clot::solve_clot;
use cyclic_ot::datagen::image::{grid_cost, image_to_marginal, GrayImage, Metric, PixelOrdering, Symmetry};
use cyclic_ot::datagen::{gen_counter_example, gen_synthetic, RngSpec};
use cyclic_ot::io::{self, LoadedProblem, ProblemData};
use cyclic_ot::lot::solve_lot;
use cyclic_ot::sinkhorn::{cyclic_sinkhorn, sinkhorn, two_stage_sinkhorn, SinkhornOptions};
use cyclic_ot::srot::{alternating_minimize, StandardRegularizer};
use cyclic_ot::{CyclicProblem64, DenseProblem64, ProbabilityVector64};

#[derive(Parser)]
#[command(name = "cyclic-ot", version, about = "Optimal transport with cyclic symmetry")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem document.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Check n-order symmetry of a dense problem and report the folded form.
    Validate(ValidateArgs),
    /// Solve a problem document with one of the algorithms.
    Solve(SolveArgs),
    /// Run a benchmark suite from a JSON config.
    Bench(BenchArgs),
}

#[derive(Subcommand)]
enum GenCommand {
    /// Seeded random cyclic instance (uniform marginals, Gaussian costs).
    Synthetic(SyntheticArgs),
    /// The order-2 family where cross-block routing beats per-block solving.
    CounterExample(CounterArgs),
    /// Dense problem from two gray images under a symmetry ordering.
    Image(ImageArgs),
}

#[derive(Args)]
struct SyntheticArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator: chacha8, chacha12, or chacha20.
    #[arg(long, default_value = "chacha8")]
    rng: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CounterArgs {
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImageArgs {
    /// First image (PGM or CSV grid), the source marginal.
    #[arg(long)]
    image_a: PathBuf,
    /// Second image, the target marginal.
    #[arg(long)]
    image_b: PathBuf,
    /// mirror (order 2) or rotation90 (order 4).
    #[arg(long, default_value = "mirror")]
    symmetry: String,
    /// manhattan, euclidean, or chebyshev pixel distance.
    #[arg(long, default_value = "euclidean")]
    metric: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long, value_name = "FILE")]
    r#in: PathBuf,
    /// Symmetry order to check; defaults to the order the file claims.
    #[arg(long)]
    n: Option<usize>,
    /// Entrywise tolerance.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args)]
struct SolveArgs {
    /// lot | clot | amin | sinkhorn | csinkhorn | two-stage
    #[arg(long)]
    algo: String,
    #[arg(long, value_name = "FILE")]
    r#in: PathBuf,
    /// Write the plan document here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Symmetry order for the reduced algorithms; defaults to the order the
    /// problem file claims.
    #[arg(long)]
    n: Option<usize>,
    /// Entropic regularization strength.
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    /// Convergence tolerance (marginal error).
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iters: usize,
    /// Stage-1 tolerance of the two-stage algorithm (folded marginal error).
    #[arg(long, default_value_t = 1e-3)]
    stage1_tol: f64,
    /// Iterate in the log domain (for cost scales that underflow exp).
    #[arg(long)]
    log_domain: bool,
    /// Force sequential deterministic execution. Solves are single-threaded
    /// and deterministic in this implementation, so this is the default and
    /// only behavior; the flag is accepted for interface stability.
    #[arg(long)]
    deterministic: bool,
    /// Regularizer for amin: "entropic:<lambda>" or "squared:<gamma>".
    #[arg(long)]
    reg: Option<String>,
    /// Entrywise tolerance when folding a dense input to order n.
    #[arg(long, default_value_t = 1e-9)]
    sym_tol: f64,
    /// Alternating-minimization sweep limit.
    #[arg(long, default_value_t = 10_000)]
    max_sweeps: usize,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    config: PathBuf,
    /// Directory for records.jsonl and summary.csv.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Gen(cmd) => gen(cmd),
        Command::Validate(args) => validate(args),
        Command::Solve(args) => solve(args),
        Command::Bench(args) => bench(args),
    }
}

fn gen(cmd: GenCommand) -> Result<()> {
    match cmd {
        GenCommand::Synthetic(args) => {
            let rng: RngSpec = args.rng.parse().map_err(|e| anyhow!("{e}"))?;
            let problem: CyclicProblem64 = gen_synthetic(args.m, args.n, args.seed, rng)
                .map_err(|e| anyhow!("{e}"))?;
            io::write_problem(&args.out, &ProblemData::Cyclic(problem), args.n)
                .map_err(|e| anyhow!("{e}"))?;
            println!("wrote cyclic instance m={} n={} to {}", args.m, args.n, args.out.display());
        }
        GenCommand::CounterExample(args) => {
            let problem: CyclicProblem64 =
                gen_counter_example(args.scale).map_err(|e| anyhow!("{e}"))?;
            io::write_problem(&args.out, &ProblemData::Cyclic(problem), 2)
                .map_err(|e| anyhow!("{e}"))?;
            println!("wrote counter-example (scale {}) to {}", args.scale, args.out.display());
        }
        GenCommand::Image(args) => {
            let symmetry: Symmetry = args.symmetry.parse().map_err(|e| anyhow!("{e}"))?;
            let metric: Metric = args.metric.parse().map_err(|e| anyhow!("{e}"))?;
            let img_a = load_image(&args.image_a)?;
            let img_b = load_image(&args.image_b)?;
            if (img_a.height(), img_a.width()) != (img_b.height(), img_b.width()) {
                bail!(
                    "images disagree in shape: {}x{} vs {}x{}",
                    img_a.height(),
                    img_a.width(),
                    img_b.height(),
                    img_b.width()
                );
            }
            let ordering = PixelOrdering::for_symmetry(symmetry, img_a.height(), img_a.width())
                .map_err(|e| anyhow!("{e}"))?;
            let a: ProbabilityVector64 =
                image_to_marginal(&img_a, &ordering).map_err(|e| anyhow!("{e}"))?;
            let b = image_to_marginal(&img_b, &ordering).map_err(|e| anyhow!("{e}"))?;
            let cost = grid_cost(metric, &ordering);
            let dense = DenseProblem64::new(a, b, cost).map_err(|e| anyhow!("{e}"))?;
            io::write_problem(&args.out, &ProblemData::Dense(dense), ordering.order())
                .map_err(|e| anyhow!("{e}"))?;
            println!(
                "wrote dense image problem d={} (order {}) to {}",
                ordering.len(),
                ordering.order(),
                args.out.display()
            );
        }
    }
    Ok(())
}

fn load_image(path: &PathBuf) -> Result<GrayImage<f64>> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let img = match ext.to_ascii_lowercase().as_str() {
        "pgm" => GrayImage::from_pgm_file(path),
        "csv" => GrayImage::from_csv_file(path),
        other => bail!("unsupported image extension '{other}' (expected pgm or csv)"),
    };
    img.map_err(|e| anyhow!("{}: {e}", path.display()))
}

fn validate(args: ValidateArgs) -> Result<()> {
    let loaded = io::read_problem(&args.r#in).map_err(|e| anyhow!("{e}"))?;
    let n = args.n.unwrap_or(loaded.order);
    let dense = match loaded.data {
        ProblemData::Dense(p) => p,
        ProblemData::Cyclic(p) => expand(&p),
    };
    match validate_cyclic(&dense, n, args.tol) {
        Ok(folded) => {
            println!(
                "symmetric at order {n} within {:.1e}: m = {}, d = {}",
                args.tol,
                folded.block_size(),
                folded.dense_dim()
            );
            Ok(())
        }
        Err(e) => bail!("{e}"),
    }
}

struct ResolvedProblem {
    loaded: LoadedProblem,
}

impl ResolvedProblem {
    fn dense(&self) -> DenseProblem64 {
        match &self.loaded.data {
            ProblemData::Dense(p) => p.clone(),
            ProblemData::Cyclic(p) => expand(p),
        }
    }

    fn cyclic(&self, n: Option<usize>, sym_tol: f64) -> Result<CyclicProblem64> {
        let n = n.unwrap_or(self.loaded.order);
        match &self.loaded.data {
            ProblemData::Cyclic(p) if p.order() == n => Ok(p.clone()),
            ProblemData::Cyclic(p) => {
                validate_cyclic(&expand(p), n, sym_tol).map_err(|e| anyhow!("{e}"))
            }
            ProblemData::Dense(p) => validate_cyclic(p, n, sym_tol).map_err(|e| anyhow!("{e}")),
        }
    }
}

fn solve(args: SolveArgs) -> Result<()> {
    let loaded = io::read_problem(&args.r#in).map_err(|e| anyhow!("{e}"))?;
    let problem = ResolvedProblem { loaded };
    let opts = SinkhornOptions {
        tol: args.tol,
        max_iters: args.max_iters,
        log_domain: args.log_domain,
        ..SinkhornOptions::default()
    };

    let (plan, report): (TransportPlan<f64>, SolveReport<f64>) = match args.algo.as_str() {
        "lot" => {
            let dense = problem.dense();
            let solution =
                solve_lot(dense.a(), dense.b(), dense.cost()).map_err(|e| anyhow!("{e}"))?;
            let report = solution.report.clone();
            (TransportPlan::Dense(solution.plan), report)
        }
        "clot" => {
            let cyclic = problem.cyclic(args.n, args.sym_tol)?;
            solve_clot(&cyclic).map_err(|e| anyhow!("{e}"))?
        }
        "amin" => {
            let reg: StandardRegularizer<f64> = args
                .reg
                .as_deref()
                .context("amin needs --reg (entropic:<lambda> or squared:<gamma>)")?
                .parse()
                .map_err(|e| anyhow!("{e}"))?;
            let cyclic = problem.cyclic(args.n, args.sym_tol)?;
            let out = alternating_minimize(&cyclic, &reg, args.tol, args.max_sweeps)
                .map_err(|e| anyhow!("{e}"))?;
            (out.plan, out.report)
        }
        "sinkhorn" => {
            let dense = problem.dense();
            sinkhorn(&dense, args.lambda, &opts, None).map_err(|e| anyhow!("{e}"))?
        }
        "csinkhorn" => {
            let cyclic = problem.cyclic(args.n, args.sym_tol)?;
            cyclic_sinkhorn(&cyclic, args.lambda, &opts).map_err(|e| anyhow!("{e}"))?
        }
        "two-stage" => {
            let dense = problem.dense();
            let n = args.n.unwrap_or(problem.loaded.order);
            two_stage_sinkhorn(&dense, n, args.lambda, args.stage1_tol, &opts)
                .map_err(|e| anyhow!("{e}"))?
        }
        other => bail!("unknown algorithm '{other}'"),
    };

    print_report(&report);
    if let Some(out) = &args.out {
        io::write_plan(out, &plan, &report).map_err(|e| anyhow!("{e}"))?;
        println!("plan written to {}", out.display());
    }
    Ok(())
}

fn print_report(report: &SolveReport<f64>) {
    println!("algorithm:          {}", report.algorithm);
    println!("objective:          {:.12e}", report.objective);
    println!("marginal error:     {:.3e}", report.marginal_error);
    println!("row marginal error: {:.3e}", report.row_marginal_error);
    println!("iterations:         {}", report.iterations);
    println!("converged:          {}", report.converged);
    println!("wall time:          {:.6} s", report.wall_time);
    for phase in &report.phases {
        println!(
            "  phase {:<12} {:.6} s ({} iterations)",
            phase.label, phase.seconds, phase.iterations
        );
    }
}

fn bench(args: BenchArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("read {}", args.config.display()))?;
    let config: BenchConfig =
        serde_json_from_str(&text).with_context(|| "parse bench config")?;
    let outcome = run_suite(&config).map_err(|e| anyhow!("{e}"))?;

    std::fs::create_dir_all(&args.out_dir)?;
    let records_path = args.out_dir.join("records.jsonl");
    let summary_path = args.out_dir.join("summary.csv");
    write_records_jsonl(&records_path, &outcome.records).map_err(|e| anyhow!("{e}"))?;
    write_summary_csv(&summary_path, &outcome.summary).map_err(|e| anyhow!("{e}"))?;

    println!("{:<24} {:>4} {:>12} {:>12} {:>12}", "algorithm", "n", "objective", "marg.err", "time(s)");
    for row in &outcome.summary {
        println!(
            "{:<24} {:>4} {:>12.6} {:>12.3e} {:>12.6}",
            row.algorithm, row.n, row.objective_mean, row.marginal_error_mean, row.time_mean
        );
    }
    println!(
        "wrote {} records to {} and summary to {}",
        outcome.records.len(),
        records_path.display(),
        summary_path.display()
    );
    Ok(())
}

fn serde_json_from_str(text: &str) -> Result<BenchConfig> {
    // Route through the library's serde_json so config parsing shares the
    // exact float semantics of the problem reader.
    cyclic_ot::bench::parse_config(text).map_err(|e| anyhow!("{e}"))
}
