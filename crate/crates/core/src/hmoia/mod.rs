//! Hybrid multiobjective immune algorithm over the external variable.
//!
//! Each generation clones every archive member `⌊N_max/|A|⌋` times, mutates
//! the clones against freshly sampled points, evaluates them (in parallel)
//! and trims the merged archive back to `N_nom` by removing, in order,
//! infeasible points (worst `λ*` first), feasible dominated points and
//! finally the most crowded nondominated points.

mod density;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use density::{crowding_values, density_reduce};

use crate::error::{Error, Result};
use crate::pole::{recover_gain, sample_pole_vector};
use crate::problem::{
    augmented_objective, dominates_unchecked, nondominated_indices, AugmentedObjective, BmiProblem,
    ExternalVariable, PoleChannel, VariableLayout,
};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgoParams {
    pub n_nom: usize,
    pub n_max: usize,
    pub t_max: usize,
    pub seed: u64,
}

impl Default for AlgoParams {
    fn default() -> Self {
        Self { n_nom: 40, n_max: 160, t_max: 20, seed: 0 }
    }
}

impl AlgoParams {
    /// Defaults for multiobjective runs (`t_max = 300`).
    pub fn mop() -> Self {
        Self { t_max: 300, ..Self::default() }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nom == 0 || self.n_nom > self.n_max || self.t_max == 0 {
            return Err(Error::domain(format!(
                "need 0 < n_nom <= n_max and t_max >= 1, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// An evaluated member of the population.
#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub alpha: ExternalVariable,
    pub augmented: AugmentedObjective,
    pub lambda_star: f64,
}

impl Individual {
    pub fn is_feasible(&self) -> bool {
        self.augmented.is_feasible()
    }

    pub fn objective(&self) -> &[f64] {
        self.augmented.objective()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Archive {
    pub entries: Vec<Individual>,
    pub generation: usize,
}

impl Archive {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn feasible_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_feasible()).count()
    }
}

/// `λ*` assigned when evaluating a point fails.
pub const FAILED_LAMBDA: f64 = 1e6;

/// Evaluates `F̃(α)`. Failures (solver breakdown, domain errors) make the
/// point infeasible with `λ* = FAILED_LAMBDA` instead of aborting the run.
pub fn evaluate(problem: &BmiProblem, alpha: ExternalVariable) -> Individual {
    match augmented_objective(problem, &alpha) {
        Ok(e) => Individual { alpha, augmented: e.augmented, lambda_star: e.lambda_star },
        Err(_) => {
            let f = problem
                .objective(&alpha)
                .unwrap_or_else(|_| vec![f64::INFINITY; problem.objective_arity()]);
            Individual { augmented: AugmentedObjective::new(f, FAILED_LAMBDA), alpha, lambda_star: FAILED_LAMBDA }
        }
    }
}

/// Random source for one individual: the stream is fixed by
/// `(seed, generation, index)`, independent of thread scheduling.
pub fn stream_rng(seed: u64, generation: usize, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((generation as u64) << 32) | (index & 0xFFFF_FFFF));
    rng
}

/// Pole vectors drawn per point before falling back to entrywise sampling.
pub const POLE_DRAWS: usize = 20;
/// Levenberg–Marquardt starts per pole vector.
pub const RECOVERY_ATTEMPTS: usize = 3;

/// Draws one external variable: a scale `κ` is picked from the layout's
/// subspace scales, entries are uniform in the `κ`-scaled bounds, and the
/// gain driven by each pole channel is recovered from a pole vector drawn in
/// the `κ`-scaled pole box.
pub fn sample_point<R: Rng + ?Sized>(layout: &VariableLayout, rng: &mut R) -> ExternalVariable {
    let kappa = *layout.subspace_scales().choose(rng).unwrap_or(&1.0);
    let mut values: Vec<f64> = layout
        .bounds()
        .into_iter()
        .map(|(lo, hi)| rng.random_range((kappa * lo)..=(kappa * hi)))
        .collect();
    for channel in layout.pole_channels() {
        let block = &layout.gain_blocks()[channel.gain_block];
        let scaled = PoleChannel {
            sigma_min: kappa * channel.sigma_min,
            omega_max: kappa * channel.omega_max,
            ..channel.clone()
        };
        for _ in 0..POLE_DRAWS {
            let poles = sample_pole_vector(&scaled, rng);
            if let Ok(gain) = recover_gain(channel, block, &poles, RECOVERY_ATTEMPTS, rng) {
                layout.set_gain(&mut values, channel.gain_block, &gain);
                break;
            }
        }
    }
    ExternalVariable::new(values)
}

/// Draws and evaluates `N_nom` points.
pub fn initialize(problem: &BmiProblem, params: &AlgoParams) -> Archive {
    let entries = (0..params.n_nom)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(params.seed, 0, i as u64);
            evaluate(problem, sample_point(problem.layout(), &mut rng))
        })
        .collect();
    Archive { entries, generation: 0 }
}

/// `R = ⌊N_max / |A|⌋`.
pub fn clone_count(n_max: usize, archive_size: usize) -> usize {
    n_max / archive_size.max(1)
}

/// `L·α_i + (1 - L)·α_j`.
pub fn blend(a_i: &[f64], a_j: &[f64], l: f64) -> Vec<f64> {
    a_i.iter().zip(a_j).map(|(x, y)| l * x + (1.0 - l) * y).collect()
}

/// `α_i ⊕ α_j`: entry `k` is taken from `α_j` when `take_j[k]`.
pub fn pointwise_mix(a_i: &[f64], a_j: &[f64], take_j: &[bool]) -> Vec<f64> {
    a_i.iter().zip(a_j).zip(take_j).map(|((x, y), &t)| if t { *y } else { *x }).collect()
}

fn mutate<R: Rng + ?Sized>(layout: &VariableLayout, parent: &ExternalVariable, rng: &mut R) -> ExternalVariable {
    let fresh = sample_point(layout, rng);
    let values = if rng.random::<f64>() > 0.5 {
        let l = rng.random::<f64>();
        blend(&parent.values, &fresh.values, l)
    } else {
        let take: Vec<bool> = (0..parent.len()).map(|_| rng.random_bool(0.5)).collect();
        pointwise_mix(&parent.values, &fresh.values, &take)
    };
    // rounding in the blend must not leave the box
    let values = values
        .into_iter()
        .zip(layout.bounds())
        .map(|(v, (lo, hi))| v.clamp(lo, hi))
        .collect();
    ExternalVariable::new(values)
}

/// Clones every member `R = ⌊N_max/|A|⌋` times and mutates each clone
/// against a freshly sampled point. Offspring `i·R + j` draws from stream
/// `(seed, generation, i·R + j)`.
pub fn hypermutate(archive: &Archive, problem: &BmiProblem, params: &AlgoParams) -> Vec<ExternalVariable> {
    if archive.is_empty() {
        return Vec::new();
    }
    let r = clone_count(params.n_max, archive.len());
    (0..archive.len() * r)
        .into_par_iter()
        .map(|k| {
            let mut rng = stream_rng(params.seed, archive.generation, k as u64);
            mutate(problem.layout(), &archive.entries[k / r].alpha, &mut rng)
        })
        .collect()
}

/// Merges offspring into the population and removes members until `n_nom`
/// remain: infeasible points first (largest `λ*` first), then feasible points
/// dominated in `F` by another feasible point (uniformly at random), then
/// nondominated points by density reduction. Infeasible points are not
/// removed below `n_nom`. Survivors keep their relative order.
pub fn update_population<R: Rng + ?Sized>(
    population: Vec<Individual>,
    offspring: Vec<Individual>,
    n_nom: usize,
    rng: &mut R,
) -> Vec<Individual> {
    let mut pool = population;
    pool.extend(offspring);
    let mut alive = vec![true; pool.len()];
    let mut count = pool.len();

    // stage 1: infeasible, worst λ* first
    if count > n_nom {
        let mut infeasible: Vec<usize> = (0..pool.len()).filter(|&i| !pool[i].is_feasible()).collect();
        infeasible.sort_by(|&a, &b| pool[b].lambda_star.total_cmp(&pool[a].lambda_star));
        for i in infeasible.into_iter().take(count - n_nom) {
            alive[i] = false;
            count -= 1;
        }
    }

    // stage 2: feasible but dominated in F
    if count > n_nom {
        let feasible: Vec<usize> = (0..pool.len()).filter(|&i| alive[i]).collect();
        let mut dominated: Vec<usize> = feasible
            .iter()
            .copied()
            .filter(|&i| {
                feasible
                    .iter()
                    .any(|&j| j != i && dominates_unchecked(pool[j].objective(), pool[i].objective()))
            })
            .collect();
        dominated.shuffle(rng);
        for i in dominated.into_iter().take(count - n_nom) {
            alive[i] = false;
            count -= 1;
        }
    }

    // stage 3: density reduction among the nondominated
    if count > n_nom {
        let rest: Vec<usize> = (0..pool.len()).filter(|&i| alive[i]).collect();
        let rows: Vec<&[f64]> = rest.iter().map(|&i| pool[i].objective()).collect();
        let keep = density_reduce(&rows, n_nom, rng);
        for i in &rest {
            alive[*i] = false;
        }
        for k in keep {
            alive[rest[k]] = true;
        }
    }

    pool.into_iter().zip(alive).filter_map(|(e, a)| a.then_some(e)).collect()
}

/// Per-generation record passed to the progress sink.
#[derive(Debug, Clone, PartialEq)]
pub struct Progress {
    pub generation: usize,
    pub archive_size: usize,
    pub feasible: usize,
    /// Smallest penalty entry in the archive.
    pub best_violation: f64,
    /// Componentwise minimum of `F` over feasible members (empty if none).
    pub best_objective: Vec<f64>,
}

impl Progress {
    fn of(archive: &Archive) -> Self {
        let feasible: Vec<&Individual> = archive.entries.iter().filter(|e| e.is_feasible()).collect();
        let best_objective = match feasible.first() {
            None => Vec::new(),
            Some(first) => (0..first.objective().len())
                .map(|j| feasible.iter().map(|e| e.objective()[j]).fold(f64::INFINITY, f64::min))
                .collect(),
        };
        Self {
            generation: archive.generation,
            archive_size: archive.len(),
            feasible: feasible.len(),
            best_violation: archive
                .entries
                .iter()
                .map(|e| e.augmented.violation())
                .fold(f64::INFINITY, f64::min),
            best_objective,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Final archive: feasible and mutually nondominated in `F`. Empty when
    /// no feasible point was found, which is a legal outcome.
    pub archive: Archive,
    pub generations: usize,
    pub evaluations: usize,
    /// The feasibility early exit fired (`N = 0` only).
    pub early_exit: bool,
}

impl RunOutcome {
    pub fn found_feasible(&self) -> bool {
        !self.archive.is_empty()
    }
}

pub fn run(problem: &BmiProblem, params: &AlgoParams) -> Result<RunOutcome> {
    run_with_progress(problem, params, &mut |_| {})
}

pub fn run_with_progress(
    problem: &BmiProblem,
    params: &AlgoParams,
    sink: &mut dyn FnMut(&Progress),
) -> Result<RunOutcome> {
    params.validate()?;
    let mut archive = initialize(problem, params);
    let mut evaluations = archive.len();
    archive.entries = keep_indices(archive.entries, nondominated_indices, |e| e.augmented.values());
    sink(&Progress::of(&archive));

    let feasibility_only = problem.objective_arity() == 0;
    let mut early_exit = false;
    let mut generations = 0;
    for t in 1..=params.t_max {
        if feasibility_only && archive.entries.iter().any(Individual::is_feasible) {
            early_exit = true;
            break;
        }
        archive.generation = t;
        let offspring: Vec<Individual> = hypermutate(&archive, problem, params)
            .into_par_iter()
            .map(|alpha| evaluate(problem, alpha))
            .collect();
        evaluations += offspring.len();
        let mut rng = stream_rng(params.seed, t, u64::from(u32::MAX));
        archive.entries = update_population(std::mem::take(&mut archive.entries), offspring, params.n_nom, &mut rng);
        generations = t;
        sink(&Progress::of(&archive));
    }

    archive.entries.retain(Individual::is_feasible);
    archive.entries = keep_indices(archive.entries, nondominated_indices, |e| e.objective());
    Ok(RunOutcome { archive, generations, evaluations, early_exit })
}

fn keep_indices(
    entries: Vec<Individual>,
    select: impl Fn(&[&[f64]]) -> Vec<usize>,
    key: impl Fn(&Individual) -> &[f64],
) -> Vec<Individual> {
    let rows: Vec<&[f64]> = entries.iter().map(&key).collect();
    let keep = select(&rows);
    let mut mask = vec![false; entries.len()];
    for i in keep {
        mask[i] = true;
    }
    entries.into_iter().zip(mask).filter_map(|(e, k)| k.then_some(e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{Feasibility, GainBlock, ScalarEntry};
    use nalgebra::DMatrix;

    fn ind(f: Vec<f64>, lambda: f64) -> Individual {
        Individual {
            alpha: ExternalVariable::new(vec![0.0]),
            augmented: AugmentedObjective::new(f, lambda),
            lambda_star: lambda,
        }
    }

    fn scalar_layout(lo: f64, hi: f64) -> VariableLayout {
        VariableLayout::new(vec![ScalarEntry::new("a", lo, hi)], vec![]).unwrap()
    }

    #[test]
    fn clone_counts() {
        assert_eq!(clone_count(160, 50), 3);
        assert_eq!(clone_count(160, 40), 4);
        assert_eq!(clone_count(160, 1), 160);
    }

    #[test]
    fn mutation_operators() {
        assert_eq!(blend(&[0.0, 0.0], &[2.0, 4.0], 0.5), vec![1.0, 2.0]);
        assert_eq!(pointwise_mix(&[0.0, 0.0], &[2.0, 4.0], &[true, false]), vec![2.0, 0.0]);
    }

    #[test]
    fn hypermutation_count() {
        let layout = scalar_layout(0.0, 1.0);
        let p = BmiProblem::feasibility("t", layout.clone(), Feasibility::direct(|_: &ExternalVariable| Ok(1.0)));
        let entries = (0..50).map(|_| ind(vec![], 1.0)).collect();
        let archive = Archive { entries, generation: 1 };
        let off = hypermutate(&archive, &p, &AlgoParams::default());
        assert_eq!(off.len(), 150);
        assert!(off.iter().all(|a| (0.0..=1.0).contains(&a.values[0])));
    }

    #[test]
    fn initial_points_respect_scaled_box() {
        let p = |scales: Vec<f64>| {
            BmiProblem::feasibility(
                "t",
                scalar_layout(0.0, 10.0).with_subspace_scales(scales).unwrap(),
                Feasibility::direct(|_: &ExternalVariable| Ok(1.0)),
            )
        };
        let a = initialize(&p(vec![1.0]), &AlgoParams::default());
        assert_eq!(a.len(), 40);
        assert!(a.entries.iter().all(|e| (0.0..=10.0).contains(&e.alpha.values[0])));
        let a = initialize(&p(vec![0.1]), &AlgoParams::default());
        assert!(a.entries.iter().all(|e| (0.0..=1.0).contains(&e.alpha.values[0])));
    }

    #[test]
    fn pole_channel_initialization_places_poles_in_box() {
        let channel = PoleChannel {
            a: DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
            b: DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            c: DMatrix::identity(2, 2),
            sigma_min: 20.0,
            omega_max: 20.0,
            gain_block: 0,
        };
        let layout = VariableLayout::new(vec![], vec![GainBlock::new("F", 1, 2, -500.0, 500.0)])
            .unwrap()
            .with_pole_channel(channel.clone())
            .unwrap();
        let p = BmiProblem::feasibility("t", layout.clone(), Feasibility::direct(|_: &ExternalVariable| Ok(1.0)));
        let a = initialize(&p, &AlgoParams { n_nom: 20, ..Default::default() });
        for e in &a.entries {
            let f = layout.gain(&e.alpha, 0);
            let eig = crate::linalg::eigenvalues(&(&channel.a + &channel.b * f * &channel.c)).unwrap();
            for z in eig.iter() {
                assert!(z.re <= 1e-4 && z.re >= -20.0 - 1e-4 && z.im.abs() <= 20.0 + 1e-4, "{z}");
            }
        }
    }

    #[test]
    fn stage_order_example() {
        // 41 feasible nondominated points on a line, 120 infeasible
        let mut pool: Vec<Individual> = (0..41).map(|k| ind(vec![k as f64, 40.0 - k as f64], -1.0)).collect();
        pool.extend((0..120).map(|k| ind(vec![0.0, 0.0], 1.0 + k as f64)));
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = update_population(pool, vec![], 40, &mut rng);
        assert_eq!(out.len(), 40);
        assert!(out.iter().all(Individual::is_feasible));
    }

    #[test]
    fn infeasible_survive_down_to_nominal_size() {
        let pool: Vec<Individual> = (0..50).map(|k| ind(vec![1.0], k as f64 + 1.0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = update_population(pool, vec![], 40, &mut rng);
        assert_eq!(out.len(), 40);
        // the ten largest λ* are gone
        assert!(out.iter().all(|e| e.lambda_star <= 40.0));
    }

    #[test]
    fn evaluation_failure_is_infeasible() {
        let p = BmiProblem::new(
            "t",
            scalar_layout(0.0, 1.0),
            1,
            |a: &ExternalVariable| Ok(vec![a.values[0]]),
            Feasibility::direct(|_: &ExternalVariable| Err(Error::Numerical("boom".into()))),
        );
        let e = evaluate(&p, ExternalVariable::new(vec![0.5]));
        assert_eq!(e.lambda_star, FAILED_LAMBDA);
        assert!(!e.is_feasible());
        assert_eq!(e.objective(), &[0.5]);
    }

    #[test]
    fn feasibility_toy_exits_early() {
        let p = BmiProblem::feasibility(
            "disk",
            scalar_layout(-2.0, 2.0),
            Feasibility::direct(|a: &ExternalVariable| Ok(a.values[0] * a.values[0] - 1.0)),
        );
        let out = run(&p, &AlgoParams::default().with_seed(3)).unwrap();
        assert!(out.found_feasible());
        assert!(out.archive.entries.iter().all(|e| e.alpha.values[0].abs() < 1.0));
    }

    #[test]
    fn sop_toy_reaches_boundary() {
        let p = BmiProblem::new(
            "sop",
            scalar_layout(0.0, 10.0),
            1,
            |a: &ExternalVariable| Ok(vec![a.values[0]]),
            Feasibility::direct(|a: &ExternalVariable| Ok(1.0 - a.values[0])),
        );
        let out = run(&p, &AlgoParams::default().with_seed(1)).unwrap();
        let best = out.archive.entries.iter().map(|e| e.alpha.values[0]).fold(f64::INFINITY, f64::min);
        assert!((best - 1.0).abs() < 1e-2, "{best}");
    }

    #[test]
    fn two_objective_toy_spans_segment() {
        let p = BmiProblem::new(
            "seg",
            scalar_layout(0.0, 1.0),
            2,
            |a: &ExternalVariable| Ok(vec![a.values[0], 1.0 - a.values[0]]),
            Feasibility::direct(|_: &ExternalVariable| Ok(-1.0)),
        );
        let out = run(&p, &AlgoParams::default().with_seed(2)).unwrap();
        let xs: Vec<f64> = out.archive.entries.iter().map(|e| e.alpha.values[0]).collect();
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(lo < 0.05 && hi > 0.95, "{lo} {hi}");
        let rows: Vec<&[f64]> = out.archive.entries.iter().map(|e| e.objective()).collect();
        assert_eq!(nondominated_indices(&rows).len(), rows.len());
    }

    #[test]
    fn equal_seeds_give_equal_archives() {
        let p = BmiProblem::new(
            "sop",
            scalar_layout(0.0, 10.0),
            1,
            |a: &ExternalVariable| Ok(vec![a.values[0]]),
            Feasibility::direct(|a: &ExternalVariable| Ok(1.0 - a.values[0])),
        );
        let params = AlgoParams { t_max: 5, ..AlgoParams::default().with_seed(9) };
        assert_eq!(run(&p, &params).unwrap(), run(&p, &params).unwrap());
    }
}
