//! Batch runs: configuration, per-run result rows, the summary row and the
//! approximate Pareto front file.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::{catalog_problem, plant_problem, Mode, Settings};
use super::io::{load_plant, CatalogData};
use crate::error::{Error, Result};
use crate::hmoia::{run, AlgoParams, Individual, RunOutcome};
use crate::problem::{nondominated_indices, BmiProblem};

/// Experiment configuration, read from JSON. Every key is optional.
///
/// `problem` names a catalog entry (`lpvs`, `st`, ...) or is `"plant"`/absent
/// for a plant design run selected by `mode`. `plant_path` points at a plant
/// file for plant runs and at a catalog data file for catalog entries that
/// need one. Relative paths are resolved against the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub problem: Option<String>,
    pub plant_path: Option<PathBuf>,
    pub mode: Option<Mode>,
    pub n_nom: usize,
    pub n_max: usize,
    /// Defaults to 20, or 300 for the multiobjective modes.
    pub t_max: Option<usize>,
    pub runs: usize,
    pub seed: u64,
    pub sigma_min: f64,
    pub omega_max: f64,
    pub gain_bound: Option<f64>,
    pub out_dir: PathBuf,
    pub use_pole_box: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let algo = AlgoParams::default();
        let s = Settings::default();
        Self {
            problem: None,
            plant_path: None,
            mode: None,
            n_nom: algo.n_nom,
            n_max: algo.n_max,
            t_max: None,
            runs: 1,
            seed: 0,
            sigma_min: s.sigma_min,
            omega_max: s.omega_max,
            gain_bound: None,
            out_dir: PathBuf::from("results"),
            use_pole_box: true,
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            message: format!("line {}, column {}: {e}", e.line(), e.column()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::parse(&fs::read_to_string(path)?, &path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(p) = cfg.plant_path.as_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::domain("runs must be at least 1"));
        }
        self.algo_params(0).validate()?;
        let plant_run = matches!(self.problem.as_deref(), None | Some("plant"));
        if plant_run && (self.mode.is_none() || self.plant_path.is_none()) {
            return Err(Error::MissingData("a plant run needs both `mode` and `plant_path`".into()));
        }
        if !plant_run && self.mode.is_some() {
            return Err(Error::domain("`mode` only applies to plant runs"));
        }
        Ok(())
    }

    fn is_mop(&self) -> bool {
        matches!(self.mode, Some(Mode::MopSparse | Mode::MopMixed))
    }

    pub fn algo_params(&self, run: usize) -> AlgoParams {
        let t_max = self.t_max.unwrap_or(if self.is_mop() { AlgoParams::mop().t_max } else { AlgoParams::default().t_max });
        AlgoParams { n_nom: self.n_nom, n_max: self.n_max, t_max, seed: self.seed.wrapping_add(run as u64) }
    }

    pub fn settings(&self) -> Settings {
        Settings {
            sigma_min: self.sigma_min,
            omega_max: self.omega_max,
            gain_bound: self.gain_bound,
            use_pole_box: self.use_pole_box,
        }
    }

    pub fn resolve_problem(&self) -> Result<BmiProblem> {
        self.validate()?;
        match self.problem.as_deref() {
            None | Some("plant") => {
                let plant = load_plant(self.plant_path.as_ref().expect("validated"))?;
                plant_problem(&plant, self.mode.expect("validated"), &self.settings())
            }
            Some(id) => {
                let data = self.plant_path.as_ref().map(CatalogData::load).transpose()?;
                catalog_problem(id, data.as_ref(), &self.settings())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Solved,
    NoFeasiblePoint,
    Error,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Solved => "solved",
            RunStatus::NoFeasiblePoint => "no_feasible_point",
            RunStatus::Error => "error",
        }
    }
}

/// One run of a batch. `objective` and `lambda_star` describe the archive
/// member with the smallest first objective (ties broken by the later ones).
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub problem: String,
    pub run: usize,
    pub seed: u64,
    pub status: RunStatus,
    pub objective: Vec<f64>,
    pub lambda_star: Option<f64>,
    pub archive_size: usize,
    pub generations: usize,
    pub evaluations: usize,
    pub wall_ms: u128,
    pub message: String,
}

/// Min/Mean/Std of the best first objective over solved runs, and the
/// success rate over all runs. Std uses the `n − 1` normalization.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub min: Option<f64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub success_rate: f64,
}

impl Summary {
    pub fn of(rows: &[ResultRow]) -> Self {
        let solved: Vec<f64> = rows
            .iter()
            .filter(|r| r.status == RunStatus::Solved)
            .filter_map(|r| r.objective.first().copied())
            .collect();
        let n_solved = rows.iter().filter(|r| r.status == RunStatus::Solved).count();
        let success_rate = if rows.is_empty() { 0.0 } else { 100.0 * n_solved as f64 / rows.len() as f64 };
        if solved.is_empty() {
            return Self { min: None, mean: None, std: None, success_rate };
        }
        let k = solved.len() as f64;
        let mean = solved.iter().sum::<f64>() / k;
        let std = if solved.len() > 1 {
            (solved.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            0.0
        };
        Self {
            min: Some(solved.iter().cloned().fold(f64::INFINITY, f64::min)),
            mean: Some(mean),
            std: Some(std),
            success_rate,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub label: String,
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    /// Final archive of each run (`None` for runs that errored).
    pub outcomes: Vec<Option<RunOutcome>>,
    /// Nondominated union of the final archives, sorted by the first objective.
    pub front: Vec<Individual>,
    pub results_path: PathBuf,
    pub timing_path: PathBuf,
    pub apf_path: Option<PathBuf>,
}

impl ExperimentReport {
    /// 0 when some run found a feasible point, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.status == RunStatus::Solved) {
            0
        } else {
            2
        }
    }
}

/// Formats a real with 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn label_for(problem: &BmiProblem) -> String {
    problem
        .name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn run_experiment(config: &RunConfig) -> Result<ExperimentReport> {
    let problem = config.resolve_problem()?;
    run_problem(&problem, config)
}

fn best_member(outcome: &RunOutcome) -> Option<&Individual> {
    outcome.archive.entries.iter().min_by(|a, b| {
        a.objective()
            .iter()
            .zip(b.objective())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Runs `config.runs` seeded searches on `problem` in parallel and writes
/// `<label>_results.csv`, `<label>_timing.csv` and, for two or more
/// objectives, `<label>_apf.csv` into `config.out_dir`.
pub fn run_problem(problem: &BmiProblem, config: &RunConfig) -> Result<ExperimentReport> {
    if config.runs == 0 {
        return Err(Error::domain("runs must be at least 1"));
    }
    let label = label_for(problem);
    let arity = problem.objective_arity();
    let results: Vec<(ResultRow, Option<RunOutcome>)> = (0..config.runs)
        .into_par_iter()
        .map(|k| {
            let params = config.algo_params(k);
            let start = Instant::now();
            let res = run(problem, &params);
            let wall_ms = start.elapsed().as_millis();
            let mut row = ResultRow {
                problem: label.clone(),
                run: k,
                seed: params.seed,
                status: RunStatus::Error,
                objective: Vec::new(),
                lambda_star: None,
                archive_size: 0,
                generations: 0,
                evaluations: 0,
                wall_ms,
                message: String::new(),
            };
            match res {
                Err(e) => {
                    row.message = e.to_string();
                    (row, None)
                }
                Ok(outcome) => {
                    row.archive_size = outcome.archive.len();
                    row.generations = outcome.generations;
                    row.evaluations = outcome.evaluations;
                    match best_member(&outcome) {
                        Some(best) => {
                            row.status = RunStatus::Solved;
                            row.objective = best.objective().to_vec();
                            row.lambda_star = Some(best.lambda_star);
                        }
                        None => row.status = RunStatus::NoFeasiblePoint,
                    }
                    (row, Some(outcome))
                }
            }
        })
        .collect();
    let (rows, outcomes): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let summary = Summary::of(&rows);

    let mut pool: Vec<Individual> = outcomes.iter().flatten().flat_map(|o| o.archive.entries.iter().cloned()).collect();
    pool.sort_by(|a, b| {
        a.objective()
            .iter()
            .zip(b.objective())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    pool.dedup_by(|a, b| a.objective() == b.objective());
    let keep = {
        let f: Vec<&[f64]> = pool.iter().map(Individual::objective).collect();
        nondominated_indices(&f)
    };
    let front: Vec<Individual> = keep.into_iter().map(|i| pool[i].clone()).collect();

    fs::create_dir_all(&config.out_dir)?;
    let results_path = config.out_dir.join(format!("{label}_results.csv"));
    fs::write(&results_path, results_csv(&rows, &summary, arity)?)?;
    let timing_path = config.out_dir.join(format!("{label}_timing.csv"));
    fs::write(&timing_path, timing_csv(&rows)?)?;
    let apf_path = if arity >= 2 {
        let path = config.out_dir.join(format!("{label}_apf.csv"));
        fs::write(&path, apf_csv(&front, arity)?)?;
        Some(path)
    } else {
        None
    };
    Ok(ExperimentReport { label, rows, summary, outcomes, front, results_path, timing_path, apf_path })
}

fn objective_headers(arity: usize) -> Vec<String> {
    (1..=arity).map(|k| format!("f{k}")).collect()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per run followed by a summary row whose `run` field is `summary`.
/// Wall-clock times are kept out of this file so equal seeds give equal bytes.
pub fn results_csv(rows: &[ResultRow], summary: &Summary, arity: usize) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header: Vec<String> = ["problem", "run", "seed", "status"].map(String::from).to_vec();
    header.extend(objective_headers(arity));
    header.extend(
        ["lambda_star", "archive_size", "generations", "evaluations", "min", "mean", "std", "sr_percent", "message"]
            .map(String::from),
    );
    w.write_record(&header)?;
    let opt = |v: Option<f64>| v.map(fmt_real).unwrap_or_default();
    for r in rows {
        let mut rec = vec![r.problem.clone(), r.run.to_string(), r.seed.to_string(), r.status.as_str().to_string()];
        for k in 0..arity {
            rec.push(r.objective.get(k).map(|v| fmt_real(*v)).unwrap_or_default());
        }
        rec.push(opt(r.lambda_star));
        rec.extend([r.archive_size.to_string(), r.generations.to_string(), r.evaluations.to_string()]);
        rec.extend([String::new(), String::new(), String::new(), String::new(), r.message.clone()]);
        w.write_record(&rec)?;
    }
    let problem = rows.first().map(|r| r.problem.clone()).unwrap_or_default();
    let mut rec = vec![problem, "summary".to_string(), String::new(), String::new()];
    rec.extend(std::iter::repeat_n(String::new(), arity + 4));
    rec.extend([opt(summary.min), opt(summary.mean), opt(summary.std), fmt_real(summary.success_rate), String::new()]);
    w.write_record(&rec)?;
    finish(w)
}

fn timing_csv(rows: &[ResultRow]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(["run", "seed", "wall_ms"])?;
    for r in rows {
        w.write_record([r.run.to_string(), r.seed.to_string(), r.wall_ms.to_string()])?;
    }
    finish(w)
}

/// Columns `f1..fN, lambda_star`.
pub fn apf_csv(front: &[Individual], arity: usize) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let mut header = objective_headers(arity);
    header.push("lambda_star".into());
    w.write_record(&header)?;
    for e in front {
        let mut rec: Vec<String> = e.objective().iter().map(|v| fmt_real(*v)).collect();
        rec.push(fmt_real(e.lambda_star));
        w.write_record(&rec)?;
    }
    finish(w)
}
