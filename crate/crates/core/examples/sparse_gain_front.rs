//! Trade-off between decay rate and gain sparsity for a three-state plant.
//! Writes the front CSV and an SVG plot into `results/`.

use nalgebra::DMatrix;

use mrv::bench::{emit_plot, plant_problem, run_problem, Mode, RunConfig, Settings};
use mrv::control::PlantModel;

fn main() -> mrv::Result<()> {
    let a = DMatrix::from_row_slice(3, 3, &[0.2, 1.0, 0.0, 0.0, -0.3, 1.0, 0.5, 0.0, -1.0]);
    let b = DMatrix::from_row_slice(3, 2, &[0.0, 1.0, 1.0, 0.0, 0.5, 0.5]);
    let plant = PlantModel::new(
        "three_state",
        a,
        DMatrix::zeros(3, 0),
        b,
        DMatrix::zeros(0, 3),
        DMatrix::identity(3, 3),
        DMatrix::zeros(0, 0),
        DMatrix::zeros(0, 2),
    )?;
    let settings = Settings { sigma_min: 5.0, omega_max: 5.0, ..Settings::default() };
    let problem = plant_problem(&plant, Mode::MopSparse, &settings)?;
    let t_max = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let config = RunConfig { problem: Some("plant".into()), t_max: Some(t_max), ..RunConfig::default() };
    let report = run_problem(&problem, &config)?;
    println!("{} nondominated points", report.front.len());
    for e in &report.front {
        println!("  beta {:.4}  gain sum {:.4}", -e.objective()[0], e.objective()[1]);
    }
    if let Some(apf) = &report.apf_path {
        let svg = apf.with_extension("svg");
        emit_plot(apf, &svg)?;
        println!("front: {}\nplot: {}", apf.display(), svg.display());
    }
    Ok(())
}
