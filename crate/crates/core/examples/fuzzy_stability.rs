//! Stability test of a two-rule fuzzy system: a feasibility search over the
//! multipliers that couple the two Lyapunov matrices.

use nalgebra::DMatrix;

use mrv::bench::{catalog_problem, CatalogData, Settings};
use mrv::hmoia::{run, AlgoParams};

fn main() -> mrv::Result<()> {
    let data = CatalogData::default()
        .with_matrix("A1", DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0]))
        .with_matrix("A2", DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 1.0, -1.0]))
        .with_scalar("mu", 0.1);
    let problem = catalog_problem("st", Some(&data), &Settings::default())?;
    let outcome = run(&problem, &AlgoParams::default().with_seed(1))?;
    println!("{} generations, {} evaluations", outcome.generations, outcome.evaluations);
    match outcome.archive.entries.first() {
        Some(e) => println!("multipliers {:.4?} certify feasibility, lambda* = {:.3e}", e.alpha.values, e.lambda_star),
        None => println!("no feasible multipliers found"),
    }
    Ok(())
}
