//! Wired benchmark problems: the fixed LPVS instance, data-driven catalog
//! encodings (ST, SIP, SAFS-I/II, OCS, SSS) and the plant-based design modes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::io::CatalogData;
use crate::control::{closed_loop, h2_norm, hinf_norm, spectral_abscissa, PlantModel, HINF_TOL};
use crate::error::{Error, Result};
use crate::lmi::{solve_evp, Affine, AffineMatrixFunction, LmiBuilder, Var};
use crate::problem::{BmiProblem, ExternalVariable, Feasibility, GainBlock, PoleChannel, ScalarEntry, VariableLayout};

/// Objective and penalty level assigned to unstable closed loops in the norm
/// modes.
pub const UNSTABLE_PENALTY: f64 = 1e5;
pub const SUBSPACE_SCALES: [f64; 3] = [1.0, 0.5, 0.1];
pub const DEFAULT_GAIN_BOUND: f64 = 50.0;

/// Design modes available for a user-supplied plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Feasibility,
    SpectralAbscissa,
    H2,
    Hinf,
    MopSparse,
    MopMixed,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::Feasibility,
        Mode::SpectralAbscissa,
        Mode::H2,
        Mode::Hinf,
        Mode::MopSparse,
        Mode::MopMixed,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Feasibility => "feasibility",
            Mode::SpectralAbscissa => "spectral_abscissa",
            Mode::H2 => "h2",
            Mode::Hinf => "hinf",
            Mode::MopSparse => "mop_sparse",
            Mode::MopMixed => "mop_mixed",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Mode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::UnknownProblem(format!("mode `{s}`")))
    }
}

/// Knobs shared by the catalog and plant modes.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub sigma_min: f64,
    pub omega_max: f64,
    /// Overrides the per-problem entry bound on gains when set.
    pub gain_bound: Option<f64>,
    pub use_pole_box: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Self { sigma_min: 20.0, omega_max: 20.0, gain_bound: None, use_pole_box: true }
    }
}

impl Settings {
    fn bound(&self, default: f64) -> f64 {
        self.gain_bound.unwrap_or(default)
    }
}

pub const CATALOG_IDS: [&str; 8] = ["lpvs", "st", "sip", "safs1", "safs2", "ocs", "sss", "mcd"];

/// Catalog problem by id. Everything except `lpvs` needs a data file.
pub fn catalog_problem(id: &str, data: Option<&CatalogData>, settings: &Settings) -> Result<BmiProblem> {
    let need = || {
        data.ok_or_else(|| Error::MissingData(format!("problem `{id}` needs a data file with its plant matrices")))
    };
    match id {
        "lpvs" => lpvs(),
        "st" => st(need()?),
        "sip" => sip(need()?, settings),
        "safs1" => safs1(need()?, settings),
        "safs2" => safs2(need()?, settings),
        "ocs" => ocs(need()?, settings),
        "sss" => sss(need()?, settings),
        "mcd" => Err(Error::MissingData(
            "`mcd` is defined by constraints that are not reproduced here; supply it as a custom problem".into(),
        )),
        other => Err(Error::UnknownProblem(other.to_string())),
    }
}

fn ident(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

fn var(v: Var) -> Affine {
    Affine::var(v)
}

/// `(V·M, ⋆)`.
fn sym_vm(v: Var, m: &DMatrix<f64>) -> Affine {
    var(v).right_mul(m).sym()
}

fn konst(m: DMatrix<f64>) -> Affine {
    Affine::constant(m)
}

fn indexed(data: &CatalogData, prefix: &str, k: usize) -> Result<DMatrix<f64>> {
    data.matrix(&format!("{prefix}{k}")).cloned()
}

fn square(data: &CatalogData, name: &str) -> Result<DMatrix<f64>> {
    let m = data.matrix(name)?.clone();
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::structural(format!("`{}`: {name} must be square", data.name)));
    }
    Ok(m)
}

fn expect_shape(data: &CatalogData, name: &str, m: &DMatrix<f64>, shape: (usize, usize)) -> Result<()> {
    if m.shape() != shape {
        return Err(Error::structural(format!(
            "`{}`: {name} has shape {:?}, expected {shape:?}",
            data.name,
            m.shape()
        )));
    }
    Ok(())
}

/// `max ς` such that the polytope `{A1, A2(ς)}` admits the two-certificate
/// stability condition.
pub fn lpvs() -> Result<BmiProblem> {
    let layout = VariableLayout::new(
        vec![
            ScalarEntry::new("varsigma", 0.0, 10.0),
            ScalarEntry::new("delta1", 0.0, 1.0),
            ScalarEntry::new("delta2", 0.0, 1.0),
        ],
        vec![],
    )?;
    let assemble = |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let (s, d1, d2) = (alpha.values[0], alpha.values[1], alpha.values[2]);
        let a1 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -1.0]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0 - s, -1.0]);
        let mut b = LmiBuilder::new();
        let p1 = b.symmetric("P1", 2);
        let p2 = b.symmetric("P2", 2);
        let diff = var(p2) - var(p1);
        b.add(sym_vm(p2, &a1) * (1.0 - d2) + diff.clone() * d2)?;
        b.add(sym_vm(p1, &a2) * (1.0 - d1) - diff * d1)?;
        b.add(sym_vm(p1, &a1))?;
        b.add(sym_vm(p2, &a2))?;
        for p in [p1, p2] {
            b.add(-var(p))?;
            b.add(var(p) - konst(ident(2)))?;
        }
        b.build()
    };
    Ok(BmiProblem::new(
        "lpvs",
        layout,
        1,
        |alpha: &ExternalVariable| Ok(vec![-alpha.values[0]]),
        Feasibility::lmi(assemble),
    ))
}

fn tau_entries(names: &[&str], upper: f64) -> Vec<ScalarEntry> {
    names.iter().map(|n| ScalarEntry::new(*n, 0.0, upper)).collect()
}

/// Index of `τ_ℓij` (j ≠ i) in `(τ112, τ121, τ212, τ221)`.
fn tau_index(l: usize, i: usize) -> usize {
    2 * (l - 1) + (i - 1)
}

/// Fuzzy-system stability test, data `A1`, `A2` and optional `mu`.
fn st(data: &CatalogData) -> Result<BmiProblem> {
    let a = [square(data, "A1")?, square(data, "A2")?];
    let n = a[0].nrows();
    expect_shape(data, "A2", &a[1], (n, n))?;
    let mu = data.scalar_or("mu", 0.1);
    let layout = VariableLayout::new(tau_entries(&["tau112", "tau121", "tau212", "tau221"], 10.0), vec![])?;
    let assemble = move |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let mut b = LmiBuilder::new();
        let p = [b.symmetric("P1", n), b.symmetric("P2", n)];
        for l in 1..=2 {
            for i in 1..=2 {
                let j = 3 - i;
                let tau = alpha.values[tau_index(l, i)];
                let expr = sym_vm(p[i - 1], &a[l - 1]) + konst(ident(n) * (mu * mu))
                    - (var(p[j - 1]) - var(p[i - 1])) * tau;
                b.add(expr)?;
            }
        }
        for pi in p {
            b.add(-var(pi))?;
        }
        b.build()
    };
    Ok(BmiProblem::feasibility("st", layout, Feasibility::lmi(assemble)))
}

/// Inverted-pendulum stabilization, data `A1`, `A2`, `B1`, `B2`, optional `mu`.
fn sip(data: &CatalogData, settings: &Settings) -> Result<BmiProblem> {
    let a = [square(data, "A1")?, square(data, "A2")?];
    let n = a[0].nrows();
    let bm = [data.matrix("B1")?.clone(), data.matrix("B2")?.clone()];
    let nu = bm[0].ncols();
    expect_shape(data, "A2", &a[1], (n, n))?;
    expect_shape(data, "B1", &bm[0], (n, nu))?;
    expect_shape(data, "B2", &bm[1], (n, nu))?;
    let mu = data.scalar_or("mu", 0.001);
    let g = settings.bound(10.0);
    let layout = VariableLayout::new(
        tau_entries(&["tau112", "tau121", "tau212", "tau221"], 10.0),
        vec![GainBlock::new("F1", nu, n, -g, g), GainBlock::new("F2", nu, n, -g, g)],
    )?;
    let lay = layout.clone();
    let assemble = move |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let f = [lay.gain(alpha, 0), lay.gain(alpha, 1)];
        let mut b = LmiBuilder::new();
        let p = [b.symmetric("P1", n), b.symmetric("P2", n)];
        for l in 1..=2 {
            for i in 1..=2 {
                let j = 3 - i;
                let tau = alpha.values[tau_index(l, i)];
                let acl = &a[l - 1] + &bm[l - 1] * &f[i - 1];
                let corner = sym_vm(p[i - 1], &acl) + konst(ident(n) * (mu * mu))
                    - (var(p[j - 1]) - var(p[i - 1])) * tau;
                b.add_grid(vec![
                    vec![corner],
                    vec![var(p[i - 1]), konst(-ident(n))],
                    vec![konst(&f[i - 1] * mu), Affine::zeros(nu, n), konst(-ident(nu))],
                ])?;
            }
        }
        for pi in p {
            b.add(-var(pi))?;
        }
        b.build()
    };
    Ok(BmiProblem::feasibility("sip", layout, Feasibility::lmi(assemble)))
}

/// S-procedure data `(T, u, v)` attached to one rule pair.
#[derive(Clone)]
struct Region {
    t: DMatrix<f64>,
    u: DMatrix<f64>,
    v: f64,
}

fn region(data: &CatalogData, tag: &str, n: usize) -> Result<Region> {
    let t = data.matrix(&format!("T{tag}"))?.clone();
    let u = data.matrix(&format!("u{tag}"))?.clone();
    expect_shape(data, &format!("T{tag}"), &t, (n, n))?;
    expect_shape(data, &format!("u{tag}"), &u, (n, 1))?;
    Ok(Region { t, u, v: data.scalar(&format!("v{tag}"))? })
}

/// Discrete-time affine fuzzy system, data `A1..A3`, `B1..B3`, `mu1..mu3`
/// and `T, u, v` for the pairs 11, 33, 12, 23.
fn safs1(data: &CatalogData, settings: &Settings) -> Result<BmiProblem> {
    let a: Vec<DMatrix<f64>> = (1..=3).map(|k| indexed(data, "A", k)).collect::<Result<_>>()?;
    let n = a[0].nrows();
    let bm: Vec<DMatrix<f64>> = (1..=3).map(|k| indexed(data, "B", k)).collect::<Result<_>>()?;
    let nu = bm[0].ncols();
    let mu: Vec<DMatrix<f64>> = (1..=3).map(|k| indexed(data, "mu", k)).collect::<Result<_>>()?;
    for k in 0..3 {
        expect_shape(data, &format!("A{}", k + 1), &a[k], (n, n))?;
        expect_shape(data, &format!("B{}", k + 1), &bm[k], (n, nu))?;
        expect_shape(data, &format!("mu{}", k + 1), &mu[k], (n, 1))?;
    }
    let pairs = [(1usize, 1usize), (3, 3), (1, 2), (2, 3)];
    let regions: Vec<Region> = pairs.iter().map(|(i, j)| region(data, &format!("{i}{j}"), n)).collect::<Result<_>>()?;
    let g = settings.bound(5.0);
    let layout = VariableLayout::new(
        tau_entries(&["tau11", "tau33", "tau12", "tau23"], 5.0),
        (1..=3).map(|k| GainBlock::new(format!("F{k}"), nu, n, -g, g)).collect(),
    )?;
    let lay = layout.clone();
    let assemble = move |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let f: Vec<DMatrix<f64>> = (0..3).map(|k| lay.gain(alpha, k)).collect();
        let gij = |i: usize, j: usize| {
            ((&a[i - 1] - &bm[i - 1] * &f[j - 1]) + (&a[j - 1] - &bm[j - 1] * &f[i - 1])) * 0.5
        };
        let mut b = LmiBuilder::new();
        let p = b.symmetric("P", n);
        let g22 = gij(2, 2);
        b.add(Affine::product(&g22.transpose(), p, &g22) - var(p))?;
        for (k, &(i, j)) in pairs.iter().enumerate() {
            let tau = alpha.values[k];
            let r = &regions[k];
            let gm = gij(i, j);
            let sigma = (&mu[i - 1] + &mu[j - 1]) * 0.5;
            let corner = Affine::product(&gm.transpose(), p, &gm) - var(p) - konst(&r.t * tau);
            let off = Affine::product(&sigma.transpose(), p, &gm) - konst(r.u.transpose() * tau);
            let last = Affine::product(&sigma.transpose(), p, &sigma) - konst(DMatrix::from_element(1, 1, tau * r.v));
            b.add_grid(vec![vec![corner], vec![off, last]])?;
        }
        b.add(-var(p))?;
        b.build()
    };
    Ok(BmiProblem::feasibility("safs1", layout, Feasibility::lmi(assemble)))
}

/// Continuous-time affine fuzzy system, data `A1..A3`, `B`, `mu1`, `mu3` and
/// `T, u, v` for the pairs 11 and 31. The offsets `σ1`, `σ3` are `nu×1`.
fn safs2(data: &CatalogData, settings: &Settings) -> Result<BmiProblem> {
    let a: Vec<DMatrix<f64>> = (1..=3).map(|k| indexed(data, "A", k)).collect::<Result<_>>()?;
    let n = a[0].nrows();
    let bm = data.matrix("B")?.clone();
    let nu = bm.ncols();
    expect_shape(data, "B", &bm, (n, nu))?;
    for (k, ak) in a.iter().enumerate() {
        expect_shape(data, &format!("A{}", k + 1), ak, (n, n))?;
    }
    let mu = [indexed(data, "mu", 1)?, indexed(data, "mu", 3)?];
    expect_shape(data, "mu1", &mu[0], (n, 1))?;
    expect_shape(data, "mu3", &mu[1], (n, 1))?;
    let regions = [region(data, "11", n)?, region(data, "31", n)?];
    let g = settings.bound(5.0);
    let mut blocks = vec![GainBlock::new("sigma1", nu, 1, -5.0, 5.0), GainBlock::new("sigma3", nu, 1, -5.0, 5.0)];
    blocks.extend((1..=3).map(|k| GainBlock::new(format!("F{k}"), nu, n, -g, g)));
    let layout = VariableLayout::new(tau_entries(&["tau11", "tau31"], 5.0), blocks)?;
    let lay = layout.clone();
    let assemble = move |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let sig = [lay.gain(alpha, 0), lay.gain(alpha, 1)];
        let f: Vec<DMatrix<f64>> = (2..5).map(|k| lay.gain(alpha, k)).collect();
        let mut b = LmiBuilder::new();
        let p = b.symmetric("P", n);
        b.add(sym_vm(p, &(&a[1] - &bm * &f[1])))?;
        // rules 1 and 3, each paired with region j = 1
        for (k, i) in [1usize, 3].into_iter().enumerate() {
            let tau = alpha.values[k];
            let r = &regions[k];
            let corner = sym_vm(p, &(&a[i - 1] - &bm * &f[i - 1])) - konst(&r.t * tau);
            let w = &mu[k] - &bm * &sig[k];
            let off = var(p).right_mul(&w).transpose() - konst(r.u.transpose() * tau);
            let last = konst(DMatrix::from_element(1, 1, -tau * r.v));
            b.add_grid(vec![vec![corner], vec![off, last]])?;
        }
        b.add(-var(p))?;
        b.build()
    };
    Ok(BmiProblem::feasibility("safs2", layout, Feasibility::lmi(assemble)))
}

struct OcsData {
    a: Vec<DMatrix<f64>>,
    b2: Vec<DMatrix<f64>>,
    c1: Vec<DMatrix<f64>>,
    c2: Vec<DMatrix<f64>>,
    b1: DMatrix<f64>,
    gamma: f64,
}

fn ocs_data(data: &CatalogData) -> Result<OcsData> {
    let a: Vec<DMatrix<f64>> = (1..=4).map(|k| indexed(data, "A", k)).collect::<Result<_>>()?;
    let b2: Vec<DMatrix<f64>> = (1..=4).map(|k| indexed(data, "B2_", k)).collect::<Result<_>>()?;
    let c1: Vec<DMatrix<f64>> = (1..=4).map(|k| indexed(data, "C1_", k)).collect::<Result<_>>()?;
    let c2: Vec<DMatrix<f64>> = (1..=4).map(|k| indexed(data, "C2_", k)).collect::<Result<_>>()?;
    let b1 = data.matrix("B1")?.clone();
    let n = a[0].nrows();
    let (nu, nz, ny, nw) = (b2[0].ncols(), c1[0].nrows(), c2[0].nrows(), b1.ncols());
    expect_shape(data, "B1", &b1, (n, nw))?;
    for k in 0..4 {
        expect_shape(data, &format!("A{}", k + 1), &a[k], (n, n))?;
        expect_shape(data, &format!("B2_{}", k + 1), &b2[k], (n, nu))?;
        expect_shape(data, &format!("C1_{}", k + 1), &c1[k], (nz, n))?;
        expect_shape(data, &format!("C2_{}", k + 1), &c2[k], (ny, n))?;
    }
    Ok(OcsData { a, b2, c1, c2, b1, gamma: data.scalar("gamma")? })
}

/// Observer-based fuzzy control, data `A1..A4`, `B2_1..B2_4`, `B1`,
/// `C1_1..C1_4`, `C2_1..C2_4` and the attenuation level `gamma`. Each
/// controller gain carries its own pole box on `A_i − B2_i·F_i`.
fn ocs(data: &CatalogData, settings: &Settings) -> Result<BmiProblem> {
    let d = Arc::new(ocs_data(data)?);
    let n = d.a[0].nrows();
    let (nu, nz, ny, nw) = (d.b2[0].ncols(), d.c1[0].nrows(), d.c2[0].nrows(), d.b1.ncols());
    let g = settings.bound(DEFAULT_GAIN_BOUND);
    let mut layout = VariableLayout::new(
        vec![],
        (1..=4).map(|k| GainBlock::new(format!("F{k}"), nu, n, -g, g)).collect(),
    )?;
    if settings.use_pole_box {
        for k in 0..4 {
            layout = layout.with_pole_channel(PoleChannel {
                a: d.a[k].clone(),
                b: -&d.b2[k],
                c: ident(n),
                sigma_min: settings.sigma_min,
                omega_max: settings.omega_max,
                gain_block: k,
            })?;
        }
    }
    let lay = layout.clone();
    let assemble = move |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let mut b = LmiBuilder::new();
        let p1 = b.symmetric("P1", n);
        let p2 = b.symmetric("P2", n);
        let gv: Vec<Var> = (1..=4).map(|k| b.general(&format!("G{k}"), n, ny)).collect();
        for k in 0..4 {
            let bf = &d.b2[k] * lay.gain(alpha, k);
            b.add_grid(vec![
                vec![sym_vm(p1, &(&d.a[k] - &bf))],
                vec![var(p1).right_mul(&bf).transpose(), sym_vm(p2, &d.a[k]) - var(gv[k]).right_mul(&d.c2[k]).sym()],
                vec![
                    var(p1).right_mul(&d.b1).transpose(),
                    var(p2).right_mul(&d.b1).transpose(),
                    konst(-ident(nw) * (d.gamma * d.gamma)),
                ],
                vec![konst(d.c1[k].clone()), Affine::zeros(nz, n), Affine::zeros(nz, nw), konst(-ident(nz))],
            ])?;
        }
        b.add(-var(p1))?;
        b.add(-var(p2))?;
        b.build()
    };
    Ok(BmiProblem::feasibility("ocs", layout, Feasibility::lmi(assemble)))
}

/// Observer gains `L_i = P2⁻¹·G_i` certified at a feasible point of the
/// `ocs` problem.
pub fn ocs_observer_gains(problem: &BmiProblem, alpha: &ExternalVariable) -> Result<Vec<DMatrix<f64>>> {
    let amf = problem
        .assemble(alpha)
        .ok_or_else(|| Error::structural("problem has no inner matrix inequality"))??;
    let res = solve_evp(&amf, problem.evp_options())?;
    if res.lambda_star >= 0.0 {
        return Err(Error::domain(format!("point is not feasible (lambda* = {:.3e})", res.lambda_star)));
    }
    let parts = amf.unpack_internal(&res.x_star)?;
    let get = |name: &str| {
        parts
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, m)| m.clone())
            .ok_or_else(|| Error::structural(format!("internal variable `{name}` not found")))
    };
    let p2_inv = get("P2")?
        .try_inverse()
        .ok_or_else(|| Error::Numerical("P2 is singular".into()))?;
    (1..=4).map(|k| Ok(&p2_inv * get(&format!("G{k}"))?)).collect()
}

/// Simultaneous state-feedback stabilization, data `A1..A3`, `B1..B3`:
/// maximize the smallest certified decay rate with one common gain.
fn sss(data: &CatalogData, settings: &Settings) -> Result<BmiProblem> {
    let a: Vec<DMatrix<f64>> = (1..=3).map(|k| indexed(data, "A", k)).collect::<Result<_>>()?;
    let bm: Vec<DMatrix<f64>> = (1..=3).map(|k| indexed(data, "B", k)).collect::<Result<_>>()?;
    let n = a[0].nrows();
    let nu = bm[0].ncols();
    for k in 0..3 {
        expect_shape(data, &format!("A{}", k + 1), &a[k], (n, n))?;
        expect_shape(data, &format!("B{}", k + 1), &bm[k], (n, nu))?;
    }
    let g = settings.bound(DEFAULT_GAIN_BOUND);
    let layout = VariableLayout::new(
        (1..=3).map(|k| ScalarEntry::new(format!("gamma{k}"), 0.0, 5.0)).collect(),
        vec![GainBlock::new("F", nu, n, -g, g)],
    )?;
    let lay = layout.clone();
    let assemble = move |alpha: &ExternalVariable| -> Result<AffineMatrixFunction> {
        let f = lay.gain(alpha, 0);
        let mut b = LmiBuilder::new();
        let p: Vec<Var> = (1..=3).map(|k| b.symmetric(&format!("P{k}"), n)).collect();
        for k in 0..3 {
            b.add(sym_vm(p[k], &(&a[k] + &bm[k] * &f)) + var(p[k]) * (2.0 * alpha.values[k]))?;
            b.add(-var(p[k]))?;
        }
        b.build()
    };
    Ok(BmiProblem::new(
        "sss",
        layout,
        1,
        |alpha: &ExternalVariable| Ok(vec![-alpha.values[..3].iter().cloned().fold(f64::INFINITY, f64::min)]),
        Feasibility::lmi(assemble),
    ))
}

/// Static output-feedback design problem over a plant.
pub fn plant_problem(plant: &PlantModel, mode: Mode, settings: &Settings) -> Result<BmiProblem> {
    plant.validate()?;
    let n = plant.states();
    let (nu, ny) = plant.gain_shape();
    let (nw, nz) = (plant.b1.ncols(), plant.c1.nrows());
    match mode {
        Mode::H2 | Mode::Hinf | Mode::MopMixed if nw == 0 || nz == 0 => {
            return Err(Error::MissingData(format!(
                "mode `{mode}` needs nonempty B1 and C1 in plant `{}`",
                plant.name
            )));
        }
        Mode::H2 if plant.d11.amax() != 0.0 => {
            return Err(Error::domain(format!("mode `h2` needs D11 = 0 in plant `{}`", plant.name)));
        }
        _ => {}
    }
    let g = settings.bound(DEFAULT_GAIN_BOUND);
    let scalars = match mode {
        Mode::MopSparse => vec![ScalarEntry::new("beta", 0.0, 1.5)],
        Mode::MopMixed => vec![ScalarEntry::new("eta", 0.0, 2.0), ScalarEntry::new("gamma", 1.0, 5.0)],
        _ => vec![],
    };
    let mut layout = VariableLayout::new(scalars, vec![GainBlock::new("F", nu, ny, -g, g)])?
        .with_subspace_scales(SUBSPACE_SCALES.to_vec())?;
    if settings.use_pole_box {
        layout = layout.with_pole_channel(PoleChannel {
            a: plant.a.clone(),
            b: plant.b.clone(),
            c: plant.c.clone(),
            sigma_min: settings.sigma_min,
            omega_max: settings.omega_max,
            gain_block: 0,
        })?;
    }
    let name = format!("{}:{}", plant.name, mode);
    let p = Arc::new(plant.clone());
    let lay = layout.clone();
    let a_f = move |alpha: &ExternalVariable| &p.a + &p.b * lay.gain(alpha, 0) * &p.c;

    let problem = match mode {
        Mode::Feasibility => BmiProblem::feasibility(
            name,
            layout,
            Feasibility::lmi(move |alpha: &ExternalVariable| {
                let af = a_f(alpha);
                let mut b = LmiBuilder::new();
                let pv = b.symmetric("P", n);
                b.add(sym_vm(pv, &af))?;
                b.add(-var(pv))?;
                b.build()
            }),
        ),
        Mode::SpectralAbscissa => {
            let a_f2 = a_f.clone();
            BmiProblem::new(
                name,
                layout,
                1,
                move |alpha: &ExternalVariable| Ok(vec![spectral_abscissa(&a_f(alpha))?]),
                Feasibility::direct(move |alpha: &ExternalVariable| spectral_abscissa(&a_f2(alpha))),
            )
        }
        Mode::H2 | Mode::Hinf => {
            let pl = Arc::new(plant.clone());
            let lay = layout.clone();
            let objective = move |alpha: &ExternalVariable| {
                let cl = closed_loop(&pl, &lay.gain(alpha, 0))?;
                if spectral_abscissa(&cl.a_f)? >= 0.0 {
                    return Ok(vec![UNSTABLE_PENALTY]);
                }
                Ok(vec![if mode == Mode::H2 { h2_norm(&cl)? } else { hinf_norm(&cl, HINF_TOL)? }])
            };
            BmiProblem::new(
                name,
                layout,
                1,
                objective,
                Feasibility::direct(move |alpha: &ExternalVariable| {
                    let ao = spectral_abscissa(&a_f(alpha))?;
                    Ok(if ao >= 0.0 { UNSTABLE_PENALTY + ao } else { ao })
                }),
            )
        }
        Mode::MopSparse => BmiProblem::new(
                name,
                layout,
                2,
                move |alpha: &ExternalVariable| {
                    let sparsity: f64 = alpha.values[1..].iter().map(|v| v.abs()).sum();
                    Ok(vec![-alpha.values[0], sparsity])
                },
                Feasibility::lmi(move |alpha: &ExternalVariable| {
                    let af = a_f(alpha);
                    let beta = alpha.values[0];
                    let mut b = LmiBuilder::new();
                    let pv = b.symmetric("P", n);
                    b.add(sym_vm(pv, &af) + var(pv) * (2.0 * beta))?;
                    b.add(-var(pv))?;
                    b.build()
                }),
            ),
        Mode::MopMixed => {
            let pl = Arc::new(plant.clone());
            let lay = layout.clone();
            BmiProblem::new(
                name,
                layout,
                2,
                |alpha: &ExternalVariable| Ok(vec![alpha.values[0], alpha.values[1]]),
                Feasibility::lmi(move |alpha: &ExternalVariable| {
                    let (eta, gamma) = (alpha.values[0], alpha.values[1]);
                    let fc = lay.gain(alpha, 0) * &pl.c;
                    let af = &pl.a + &pl.b * &fc;
                    let cf = &pl.c1 + &pl.d12 * &fc;
                    let mut b = LmiBuilder::new();
                    let p1 = b.symmetric("P1", n);
                    let p2 = b.symmetric("P2", n);
                    let z = b.symmetric("Z", nz);
                    b.add_grid(vec![
                        vec![sym_vm(p1, &af) + konst(cf.transpose() * &cf)],
                        vec![var(p1).right_mul(&pl.b1).transpose(), konst(-ident(nw) * (gamma * gamma))],
                    ])?;
                    b.add_grid(vec![
                        vec![sym_vm(p2, &af)],
                        vec![var(p2).right_mul(&pl.b1).transpose(), konst(-ident(nw))],
                    ])?;
                    b.add_grid(vec![vec![-var(p2)], vec![konst(-&cf), -var(z)]])?;
                    b.add(-var(p1))?;
                    b.add(-var(p2))?;
                    let mut trace = konst(DMatrix::from_element(1, 1, -eta * eta));
                    for k in 0..nz {
                        let e = DMatrix::from_fn(nz, 1, |i, _| if i == k { 1.0 } else { 0.0 });
                        trace = trace + Affine::product(&e.transpose(), z, &e);
                    }
                    b.add(trace)?;
                    b.build()
                }),
            )
        }
    };
    Ok(problem)
}
