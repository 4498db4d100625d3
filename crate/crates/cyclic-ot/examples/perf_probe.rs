use std::time::Instant;

use cyclic_ot::clot::solve_clot;
use cyclic_ot::core::{expand, validate_cyclic};
use cyclic_ot::datagen::{gen_synthetic, RngSpec};
use cyclic_ot::lot::solve_lot;

fn main() {
    let problem = gen_synthetic::<f64>(40, 50, 0, RngSpec::ChaCha8).unwrap();
    let t0 = Instant::now();
    let dense = expand(&problem);
    eprintln!("expand d={} in {:?}", dense.dim(), t0.elapsed());

    let t0 = Instant::now();
    let (plan, report) = solve_clot(&problem).unwrap();
    eprintln!(
        "clot n=50: obj={:.6} pivots={} time={:?} blocks={}",
        report.objective,
        report.iterations,
        t0.elapsed(),
        plan.order()
    );

    for n in [2usize, 5] {
        let t0 = Instant::now();
        let folded = validate_cyclic(&dense, n, 0.0).unwrap();
        let (_, r) = solve_clot(&folded).unwrap();
        eprintln!("clot n={n}: obj={:.6} pivots={} time={:?}", r.objective, r.iterations, t0.elapsed());
    }

    let t0 = Instant::now();
    let direct = solve_lot(dense.a(), dense.b(), dense.cost()).unwrap();
    eprintln!(
        "direct lot d=2000: obj={:.6} pivots={} time={:?} marg_err={:.3e}",
        direct.value,
        direct.report.iterations,
        t0.elapsed(),
        direct.report.marginal_error
    );
}
