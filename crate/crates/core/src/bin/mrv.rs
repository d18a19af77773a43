use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mrv::bench::{
    emit_plot, evp_result_json, load_plant, parse_amf, parse_gain, parse_place_task, place_result_json, real_or_inf,
    run_experiment, RunConfig,
};
use mrv::control::{closed_loop, h2_norm, hinf_norm, spectral_abscissa, HINF_TOL};
use mrv::lmi::solve_evp;
use mrv::pole::{eigenvalues_at, levenberg_marquardt, RECOVERY_TOL};

/// BMI design problems solved by reduction of variables.
#[derive(Parser)]
#[command(name = "mrv", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a batch of seeded searches described by a config file.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long = "t-max")]
        t_max: Option<usize>,
        #[arg(long = "n-nom")]
        n_nom: Option<usize>,
        #[arg(long = "n-max")]
        n_max: Option<usize>,
    },
    /// Solve `min λ s.t. F(x) ≺ λI` for a serialized affine matrix function.
    Evp {
        #[arg(long)]
        amf: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Find an output-feedback gain that places the closed-loop poles.
    Place {
        #[arg(long)]
        task: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spectral abscissa, H2 and H-infinity norm of a plant under a gain.
    Norms {
        #[arg(long)]
        plant: PathBuf,
        #[arg(long)]
        gain: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scatter plot of a two-objective front CSV.
    Plot {
        #[arg(long)]
        apf: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn emit(value: &serde_json::Value, out: Option<&Path>) -> mrv::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn read(path: &Path) -> mrv::Result<String> {
    Ok(fs::read_to_string(path)?)
}

fn execute(cmd: Command) -> mrv::Result<u8> {
    match cmd {
        Command::Solve { config, out, seed, runs, t_max, n_nom, n_max } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(o) = out {
                cfg.out_dir = o;
            }
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.runs = runs.unwrap_or(cfg.runs);
            cfg.t_max = t_max.or(cfg.t_max);
            cfg.n_nom = n_nom.unwrap_or(cfg.n_nom);
            cfg.n_max = n_max.unwrap_or(cfg.n_max);
            cfg.validate()?;
            let report = run_experiment(&cfg)?;
            for r in &report.rows {
                let f: Vec<String> = r.objective.iter().map(|v| format!("{v:.6}")).collect();
                eprintln!(
                    "run {:>3} seed {:>6} {:<18} F = [{}] archive {} ({} ms){}",
                    r.run,
                    r.seed,
                    r.status.as_str(),
                    f.join(", "),
                    r.archive_size,
                    r.wall_ms,
                    if r.message.is_empty() { String::new() } else { format!(": {}", r.message) }
                );
            }
            let s = &report.summary;
            let show = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "-".into());
            println!(
                "{}: min {} mean {} std {} SR {:.1}%",
                report.label,
                show(s.min),
                show(s.mean),
                show(s.std),
                s.success_rate
            );
            println!("results: {}", report.results_path.display());
            if let Some(p) = &report.apf_path {
                println!("front: {}", p.display());
            }
            Ok(report.exit_code() as u8)
        }
        Command::Evp { amf, out } => {
            let (f, opts) = parse_amf(&read(&amf)?, &amf.display().to_string())?;
            let res = solve_evp(&f, &opts)?;
            emit(&evp_result_json(&res), out.as_deref())?;
            Ok(if res.lambda_star < 0.0 { 0 } else { 2 })
        }
        Command::Place { task, out } => {
            let (t, params) = parse_place_task(&read(&task)?, &task.display().to_string())?;
            let res = levenberg_marquardt(&t, &params)?;
            let achieved = eigenvalues_at(&t, &res.q)?;
            emit(&place_result_json(&t, &res, &achieved), out.as_deref())?;
            Ok(if res.h < RECOVERY_TOL { 0 } else { 2 })
        }
        Command::Norms { plant, gain, out } => {
            let p = load_plant(&plant)?;
            let f = parse_gain(&read(&gain)?, &gain.display().to_string())?;
            let cl = closed_loop(&p, &f)?;
            let ao = spectral_abscissa(&cl.a_f)?;
            let has_io = cl.b1.ncols() > 0 && cl.c_f.nrows() > 0;
            let h2 = if has_io && cl.d11.amax() == 0.0 { Some(h2_norm(&cl)?) } else { None };
            let hinf = if has_io { Some(hinf_norm(&cl, HINF_TOL)?) } else { None };
            let value = serde_json::json!({
                "spectral_abscissa": ao,
                "h2": h2.map(real_or_inf),
                "hinf": hinf.map(real_or_inf),
            });
            emit(&value, out.as_deref())?;
            Ok(0)
        }
        Command::Plot { apf, out } => {
            emit_plot(&apf, &out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
