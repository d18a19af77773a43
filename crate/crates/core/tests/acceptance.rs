//! End-to-end acceptance checks. Each criterion prints one PASS/FAIL line;
//! the process exits non-zero if any criterion fails.

mod common;

use std::cell::Cell;
use std::fs;
use std::time::Instant;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mrv::bench::{load_plant, lpvs, plant_problem, run_problem, save_plant, Mode, RunConfig, RunStatus, Settings};
use mrv::control::{closed_loop, h2_norm, hinf_norm, ClosedLoop, HINF_TOL};
use mrv::hmoia::{density_reduce, update_population, AlgoParams, Individual};
use mrv::lmi::{solve_evp, EvpOptions};
use mrv::pole::{
    eig_jacobian, eigenvalues_at, gradient_and_hessian, levenberg_marquardt, residual, PolePlacementTask,
    TrustRegionParams,
};
use mrv::problem::{AugmentedObjective, BmiProblem, ExternalVariable, Feasibility, ScalarEntry, VariableLayout};

use common::*;

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

fn config(dir: &std::path::Path, runs: usize, seed: u64) -> RunConfig {
    RunConfig { problem: Some("custom".into()), runs, seed, out_dir: dir.to_path_buf(), ..RunConfig::default() }
}

fn lpvs_reproduction() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let report = run_problem(&lpvs().map_err(|e| e.to_string())?, &config(dir.path(), 20, 0)).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let s = &report.summary;
    let best = -s.min.unwrap_or(f64::INFINITY);
    let mean = -s.mean.unwrap_or(f64::INFINITY);
    let detail = format!("best {best:.4}, mean {mean:.4}, SR {:.0}%, {secs:.1} s", s.success_rate);
    check(best >= 4.70 && mean >= 4.50 && s.success_rate == 100.0 && secs <= 300.0, detail)
}

fn plant_file(dir: &std::path::Path, name: &str, n: usize, seed: u64) -> std::path::PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let path = dir.join(format!("{name}.json"));
    save_plant(&unstable_plant(name, n, &mut rng), &path).unwrap();
    path
}

/// Pole box matched to the synthetic plants: their recovered gains stay
/// inside the default gain bound for poles of this size.
fn plant_settings() -> Settings {
    Settings { sigma_min: 5.0, omega_max: 5.0, ..Settings::default() }
}

fn plant_designs() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plant = load_plant(plant_file(dir.path(), "synthetic4", 4, 7)).map_err(|e| e.to_string())?;
    let mut worst_abscissa = f64::NEG_INFINITY;
    let mut worst_h2: f64 = 0.0;
    let mut worst_hinf: f64 = 0.0;
    let mut solved = 0;
    for mode in [Mode::SpectralAbscissa, Mode::H2, Mode::Hinf] {
        let problem = plant_problem(&plant, mode, &plant_settings()).map_err(|e| e.to_string())?;
        let report = run_problem(&problem, &config(dir.path(), 3, 11)).map_err(|e| e.to_string())?;
        for (row, outcome) in report.rows.iter().zip(&report.outcomes) {
            if row.status != RunStatus::Solved {
                continue;
            }
            solved += 1;
            for member in &outcome.as_ref().unwrap().archive.entries {
                let f = problem.layout().gain(&member.alpha, 0);
                let cl = closed_loop(&plant, &f).unwrap();
                let ao = abscissa_via_polynomial(&cl.a_f);
                worst_abscissa = worst_abscissa.max(ao);
                match mode {
                    Mode::SpectralAbscissa => {}
                    Mode::H2 => worst_h2 = worst_h2.max(rel(member.objective()[0], h2_by_quadrature(&cl))),
                    _ => worst_hinf = worst_hinf.max(rel(member.objective()[0], hinf_by_grid(&cl))),
                }
            }
        }
    }
    let detail = format!(
        "{solved}/9 runs solved, worst re-verified abscissa {worst_abscissa:.3e}, H2 rel err {worst_h2:.1e}, Hinf rel err {worst_hinf:.1e}"
    );
    check(solved > 0 && worst_abscissa < 0.0 && worst_h2 <= 1e-3 && worst_hinf <= 1e-3, detail)
}

fn evp_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst: f64 = 0.0;
    let mut ipm_secs = 0.0;
    for _ in 0..20 {
        let (amf, radius) = random_bounded_amf(&mut rng);
        let start = Instant::now();
        let res = solve_evp(&amf, &EvpOptions::exact()).map_err(|e| e.to_string())?;
        ipm_secs += start.elapsed().as_secs_f64();
        worst = worst.max((res.lambda_star - evp_by_grid(&amf, radius)).abs());
    }
    check(worst <= 1e-4 && ipm_secs <= 10.0, format!("max |ipm - grid| {worst:.2e}, solver time {ipm_secs:.3} s"))
}

fn double_integrator(q0: Vec<f64>) -> PolePlacementTask {
    PolePlacementTask::new(
        DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
        DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
        DMatrix::identity(2, 2),
        vec![Complex64::new(-1.0, 0.0), Complex64::new(-2.0, 0.0)],
        q0,
    )
    .unwrap()
}

fn pole_placement() -> Outcome {
    let task = double_integrator(vec![-1.0, -4.0]);
    let out = levenberg_marquardt(&task, &TrustRegionParams::default()).map_err(|e| e.to_string())?;
    let gain_err = (out.q[0] + 2.0).abs().max((out.q[1] + 3.0).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut hit_instances, mut hit_starts) = (0, 0);
    for _ in 0..20 {
        let a = uniform_matrix(&mut rng, 5, 5, -1.0, 1.0);
        let b = uniform_matrix(&mut rng, 5, 2, -1.0, 1.0);
        let poles = random_poles(&mut rng, 5, 5.0, 5.0);
        let mut any = false;
        for _ in 0..10 {
            let q0: Vec<f64> = (0..10).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t = PolePlacementTask::new(a.clone(), b.clone(), DMatrix::identity(5, 5), poles.clone(), q0).unwrap();
            if levenberg_marquardt(&t, &TrustRegionParams::default()).is_ok_and(|o| o.h < 1e-8) {
                any = true;
                hit_starts += 1;
            }
        }
        hit_instances += any as usize;
    }
    let detail = format!(
        "double integrator F = [{:.6}, {:.6}] h = {:.1e}; random tasks {hit_instances}/20 instances, {hit_starts}/200 starts",
        out.q[0], out.q[1], out.h
    );
    check(gain_err < 1e-5 && out.h <= 1e-10 && hit_instances >= 16, detail)
}

fn nearest(z: Complex64, set: &[Complex64]) -> Complex64 {
    *set.iter().min_by(|a, b| (**a - z).norm().total_cmp(&(**b - z).norm())).unwrap()
}

fn derivatives() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_g, mut worst_j): (f64, f64) = (0.0, 0.0);
    let mut tasks = 0;
    while tasks < 100 {
        let n = rng.random_range(2..=5usize);
        let (m, p) = (rng.random_range(1..=2usize), rng.random_range(1..=n));
        let a = uniform_matrix(&mut rng, n, n, -1.0, 1.0);
        let b = uniform_matrix(&mut rng, n, m, -1.0, 1.0);
        let c = uniform_matrix(&mut rng, p, n, -1.0, 1.0);
        let q: Vec<f64> = (0..m * p).map(|_| rng.random_range(-1.0..1.0)).collect();
        let poles = random_poles(&mut rng, n, 3.0, 3.0);
        let task = PolePlacementTask::new(a, b, c, poles, q.clone()).unwrap();
        let eigs = eigenvalues_at(&task, &q).unwrap();
        let gap = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| (eigs[i] - eigs[j]).norm())
            .fold(f64::INFINITY, f64::min);
        let (Ok(jac), Ok((g, _))) = (eig_jacobian(&task, &q), gradient_and_hessian(&task, &q)) else {
            continue;
        };
        if gap < 0.05 {
            continue;
        }
        tasks += 1;
        let eps = 1e-6;
        let mut jac_fd = CMatrix::zeros(n, m * p);
        let mut g_fd = vec![0.0; m * p];
        for k in 0..m * p {
            let (mut qp, mut qm) = (q.clone(), q.clone());
            qp[k] += eps;
            qm[k] -= eps;
            g_fd[k] = (residual(&task, &qp).unwrap() - residual(&task, &qm).unwrap()) / (2.0 * eps);
            let (ep, em) = (eigenvalues_at(&task, &qp).unwrap(), eigenvalues_at(&task, &qm).unwrap());
            for i in 0..n {
                jac_fd[(i, k)] = (nearest(eigs[i], &ep) - nearest(eigs[i], &em)) / (2.0 * eps);
            }
        }
        let g_err = g.iter().zip(&g_fd).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            / g.norm().max(1e-8);
        let j_err = (&jac - &jac_fd).norm() / jac.norm().max(1e-8);
        worst_g = worst_g.max(g_err);
        worst_j = worst_j.max(j_err);
    }
    check(
        worst_g < 1e-4 && worst_j < 1e-4,
        format!("100 tasks, worst relative error gradient {worst_g:.1e}, eigenvalue Jacobian {worst_j:.1e}"),
    )
}

fn toy_sop() -> BmiProblem {
    let layout = VariableLayout::new(vec![ScalarEntry::new("a", 0.0, 3.0)], vec![]).unwrap();
    BmiProblem::new(
        "toy",
        layout,
        1,
        |x: &ExternalVariable| Ok(vec![x.values[0]]),
        Feasibility::direct(|x: &ExternalVariable| Ok(1.0 - x.values[0])),
    )
}

fn equivalence() -> Outcome {
    let problem = toy_sop();
    let out = mrv::hmoia::run(&problem, &AlgoParams::default()).map_err(|e| e.to_string())?;
    let best = out.archive.entries.iter().map(|e| e.objective()[0]).fold(f64::INFINITY, f64::min);
    let grid = (0..=3000).map(|k| k as f64 * 1e-3).filter(|a| 1.0 - a < 0.0).fold(f64::INFINITY, f64::min);
    check(
        (best - 1.0).abs() <= 1e-2 && (grid - best).abs() <= 1e-2,
        format!("search optimum {best:.6}, grid optimum {grid:.3}"),
    )
}

fn dominates(u: &[f64], v: &[f64]) -> bool {
    u.iter().zip(v).all(|(a, b)| a <= b) && u.iter().zip(v).any(|(a, b)| a < b)
}

fn individual(tag: usize, f: Vec<f64>, lambda: f64) -> Individual {
    Individual {
        alpha: ExternalVariable::new(vec![tag as f64]),
        augmented: AugmentedObjective::new(f, lambda),
        lambda_star: lambda,
    }
}

/// Objective count, `(F, feasible, |λ*|)` per member, population/offspring
/// split, `n_nom` and rng seed.
type PopulationCase = (usize, Vec<(Vec<f64>, bool, f64)>, usize, usize, u64);

/// Rows, target size and rng seed.
type DensityCase = (Vec<Vec<f64>>, usize, u64);

fn population_case() -> impl Strategy<Value = PopulationCase> {
    (1..=3usize).prop_flat_map(|nobj| {
        (
            Just(nobj),
            prop::collection::vec(
                (prop::collection::vec(0.0..1.0f64, nobj), any::<bool>(), 0.01..1.0f64),
                1..120,
            ),
            0..120usize,
            1..40usize,
            any::<u64>(),
        )
    })
}

fn update_invariants(case: PopulationCase) -> Result<(), TestCaseError> {
    let (_, points, split, n_nom, seed) = case;
    let pool: Vec<Individual> = points
        .iter()
        .enumerate()
        .map(|(i, (f, feas, mag))| individual(i, f.clone(), if *feas { -mag } else { *mag }))
        .collect();
    let split = split.min(pool.len());
    let (pop, off) = (pool[..split].to_vec(), pool[split..].to_vec());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out = update_population(pop, off, n_nom, &mut rng);
    prop_assert_eq!(out.len(), pool.len().min(n_nom));

    let tags: Vec<usize> = out.iter().map(|e| e.alpha.values[0] as usize).collect();
    prop_assert!(tags.windows(2).all(|w| w[0] < w[1]), "survivor order changed");
    let alive = |i: usize| tags.binary_search(&i).is_ok();
    let feasible: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].lambda_star < 0.0).collect();
    let infeasible: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].lambda_star >= 0.0).collect();
    let dominated = |i: usize| feasible.iter().any(|&j| dominates(pool[j].objective(), pool[i].objective()));

    let infeasible_left = infeasible.iter().any(|&i| alive(i));
    if infeasible_left {
        prop_assert!(feasible.iter().all(|&i| alive(i)), "feasible removed before infeasible");
    }
    if let Some(worst_alive) = infeasible.iter().filter(|&&i| alive(i)).map(|&i| pool[i].lambda_star).reduce(f64::max) {
        let best_removed = infeasible.iter().filter(|&&i| !alive(i)).map(|&i| pool[i].lambda_star).reduce(f64::min);
        prop_assert!(best_removed.is_none_or(|r| r >= worst_alive), "infeasible removal ignored lambda order");
    }
    let dominated_left = feasible.iter().any(|&i| alive(i) && dominated(i));
    if infeasible_left || dominated_left {
        let lost = feasible.iter().any(|&i| !alive(i) && !dominated(i));
        prop_assert!(!lost, "nondominated feasible point removed while worse points remain");
    }
    Ok(())
}

fn density_case() -> impl Strategy<Value = DensityCase> {
    (1..=3usize).prop_flat_map(|nobj| {
        (
            prop::collection::vec(prop::collection::vec(-10.0..10.0f64, nobj), 3..60),
            (2 * nobj).max(3)..12usize,
            any::<u64>(),
        )
    })
}

fn density_extremes(case: DensityCase) -> Result<(), TestCaseError> {
    let (rows, target, seed) = case;
    let nobj = rows[0].len();
    for j in 0..nobj {
        let mut col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        col.sort_by(f64::total_cmp);
        prop_assume!(col.windows(2).all(|w| w[0] < w[1]));
    }
    let view: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
    let keep = density_reduce(&view, target, &mut ChaCha8Rng::seed_from_u64(seed));
    prop_assert_eq!(keep.len(), rows.len().min(target));
    for j in 0..nobj {
        let arg = |better: fn(f64, f64) -> bool| {
            (0..rows.len()).reduce(|a, b| if better(rows[b][j], rows[a][j]) { b } else { a }).unwrap()
        };
        prop_assert!(keep.contains(&arg(|x, y| x < y)), "minimum of objective {} removed", j);
        prop_assert!(keep.contains(&arg(|x, y| x > y)), "maximum of objective {} removed", j);
    }
    Ok(())
}

fn disk_problem() -> BmiProblem {
    let layout = VariableLayout::new(
        vec![ScalarEntry::new("x", -2.0, 2.0), ScalarEntry::new("y", -2.0, 2.0)],
        vec![],
    )
    .unwrap();
    BmiProblem::new(
        "disk",
        layout,
        2,
        |a: &ExternalVariable| Ok(vec![a.values[0], a.values[1]]),
        Feasibility::direct(|a: &ExternalVariable| Ok(a.values[0].powi(2) + a.values[1].powi(2) - 1.0)),
    )
}

fn determinism(problem: &BmiProblem, case: (u64, usize, usize, usize, usize)) -> Result<(), TestCaseError> {
    let (seed, n_nom, extra, t_max, runs) = case;
    let mut files = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let cfg = RunConfig {
            n_nom,
            n_max: n_nom + extra,
            t_max: Some(t_max),
            ..config(dir.path(), runs, seed)
        };
        let report = run_problem(problem, &cfg).unwrap();
        files.push((
            fs::read(&report.results_path).unwrap(),
            fs::read(report.apf_path.as_ref().unwrap()).unwrap(),
        ));
    }
    prop_assert!(files[0] == files[1], "equal seeds produced different CSV bytes");
    Ok(())
}

fn hmoia_properties() -> Outcome {
    let cases = 1000;
    let counted = |count: &Cell<usize>| {
        count.set(count.get() + 1);
    };
    let (pop, dens, det) = (Cell::new(0), Cell::new(0), Cell::new(0));
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&population_case(), |c| {
            counted(&pop);
            update_invariants(c)
        })
        .map_err(|e| format!("population update: {e}"))?;
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&density_case(), |c| {
            counted(&dens);
            density_extremes(c)
        })
        .map_err(|e| format!("density reduction: {e}"))?;
    let problem = disk_problem();
    let mut runner = TestRunner::new(Config { cases, failure_persistence: None, ..Config::default() });
    runner
        .run(&(any::<u64>(), 2..10usize, 0..30usize, 1..5usize, 1..3usize), |c| {
            counted(&det);
            determinism(&problem, c)
        })
        .map_err(|e| format!("determinism: {e}"))?;
    Ok(format!(
        "cases run: population update {}, density reduction {}, seed determinism {}",
        pop.get(),
        dens.get(),
        det.get()
    ))
}

fn sparse_front() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let plant = load_plant(plant_file(dir.path(), "synthetic3", 3, 21)).map_err(|e| e.to_string())?;
    let problem = plant_problem(&plant, Mode::MopSparse, &plant_settings()).map_err(|e| e.to_string())?;
    let cfg = RunConfig { t_max: Some(300), ..config(dir.path(), 1, 4) };
    let start = Instant::now();
    let report = run_problem(&problem, &cfg).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let Some(outcome) = report.outcomes[0].as_ref() else {
        return Err(format!("run failed: {}", report.rows[0].message));
    };
    let entries = &outcome.archive.entries;
    let mutual = entries.iter().enumerate().all(|(i, a)| {
        entries.iter().enumerate().all(|(j, b)| i == j || !dominates(b.objective(), a.objective()))
    });
    let worst_lambda = entries
        .iter()
        .map(|e| {
            let amf = problem.assemble(&e.alpha).unwrap().unwrap();
            solve_evp(&amf, &EvpOptions::exact()).unwrap().lambda_star
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let mut front: Vec<&[f64]> = entries.iter().map(|e| e.objective()).collect();
    front.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let monotone = front.windows(2).all(|w| w[1][1] <= w[0][1]);
    let detail = format!(
        "{} points, nondominated {mutual}, worst re-certified lambda {worst_lambda:.3e}, monotone {monotone}, {secs:.1} s",
        entries.len()
    );
    check(!entries.is_empty() && mutual && worst_lambda < 0.0 && monotone, detail)
}

fn norm_kernels() -> Outcome {
    let one = |v: f64| DMatrix::from_element(1, 1, v);
    let scalar = ClosedLoop::new(one(-1.0), one(1.0), one(1.0), one(0.0)).unwrap();
    let h2 = h2_norm(&scalar).unwrap();
    let hinf = hinf_norm(&scalar, 1e-12).unwrap();
    let closed = (h2 - 0.5f64.sqrt()).abs().max((hinf - 1.0).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let (mut worst_h2, mut worst_hinf): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let (nw, nz) = (rng.random_range(1..=3usize), rng.random_range(1..=3usize));
        let cl = random_stable_loop(&mut rng, 5, nw, nz, false);
        worst_h2 = worst_h2.max(rel(h2_norm(&cl).unwrap(), h2_by_quadrature(&cl)));
        let cl = if k % 2 == 0 { cl } else { random_stable_loop(&mut rng, 5, nw, nz, true) };
        worst_hinf = worst_hinf.max(rel(hinf_norm(&cl, HINF_TOL).unwrap(), hinf_by_grid(&cl)));
    }
    check(
        closed <= 1e-9 && worst_h2 <= 1e-3 && worst_hinf <= 1e-4,
        format!("scalar error {closed:.1e}; 20 random systems, H2 rel err {worst_h2:.1e}, Hinf rel err {worst_hinf:.1e}"),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("LPVS search quality", lpvs_reproduction),
        ("plant design re-verification", plant_designs),
        ("EVP against grid oracle", evp_oracle),
        ("pole placement exactness", pole_placement),
        ("derivatives against finite differences", derivatives),
        ("augmented objective on a toy problem", equivalence),
        ("population and archive properties", hmoia_properties),
        ("sparse-gain front legality", sparse_front),
        ("norm kernels", norm_kernels),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = (k + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {id} {name}: {d} [{secs:.1} s]"),
            Err(d) => {
                failed += 1;
                println!("FAIL {id} {name}: {d} [{secs:.1} s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
