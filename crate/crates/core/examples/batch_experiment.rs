//! Batch of seeded runs driven by a JSON config, as `mrv solve` does.

use mrv::bench::{run_experiment, RunConfig};

fn main() -> mrv::Result<()> {
    let text = r#"{"problem": "lpvs", "runs": 5, "seed": 100, "out_dir": "results"}"#;
    let config = RunConfig::parse(text, "inline config")?;
    let report = run_experiment(&config)?;
    for row in &report.rows {
        let f = row.objective.first().map(|v| format!("{:.4}", -v)).unwrap_or_else(|| "-".into());
        println!("run {} seed {} {} varsigma {f}", row.run, row.seed, row.status.as_str());
    }
    let s = &report.summary;
    println!(
        "best {:.4}, mean {:.4}, success rate {:.0}%",
        -s.min.unwrap_or(f64::NAN),
        -s.mean.unwrap_or(f64::NAN),
        s.success_rate
    );
    println!("results written to {}", report.results_path.display());
    Ok(())
}
