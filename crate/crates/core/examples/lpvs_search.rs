//! Largest parameter range for which the two-vertex polytope stays stable,
//! found by the immune search over (ς, δ1, δ2).

use mrv::bench::lpvs;
use mrv::hmoia::{run_with_progress, AlgoParams};

fn main() -> mrv::Result<()> {
    let problem = lpvs()?;
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let params = AlgoParams::default().with_seed(seed);
    let outcome = run_with_progress(&problem, &params, &mut |p| {
        let best = p.best_objective.first().map(|f| format!("{:.4}", -f)).unwrap_or_else(|| "-".into());
        println!("gen {:>2}  archive {:>3}  feasible {:>3}  best varsigma {best}", p.generation, p.archive_size, p.feasible);
    })?;
    match outcome.archive.entries.first() {
        Some(best) => println!(
            "varsigma = {:.6} at delta = ({:.4}, {:.4}), lambda* = {:.3e}",
            best.alpha.values[0], best.alpha.values[1], best.alpha.values[2], best.lambda_star
        ),
        None => println!("no feasible point found"),
    }
    Ok(())
}
