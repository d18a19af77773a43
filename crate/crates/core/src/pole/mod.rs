//! Gain recovery from a prescribed pole vector.
//!
//! For `A(q) = A + B·F·C` with `q = vec(F)` (row-major), the residual
//! `h(q) = ½ Σ |λ_i(A(q)) - t_π(i)|²` is minimized by a trust-region
//! Levenberg–Marquardt iteration. The pairing `π` of eigenvalues to targets
//! is the minimum-norm assignment and is refreshed at every evaluation.

mod assign;
mod trust;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

pub use assign::{assign_targets, hungarian};
pub use trust::tr_subproblem;

use crate::error::{Error, Result};
use crate::linalg::{condition_number, eigen_decomposition, eigenvalues, to_complex, CMatrix};
use crate::problem::{GainBlock, PoleChannel};

const MAX_EIGENBASIS_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct PolePlacementTask {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub lambda_pre: Vec<Complex64>,
    pub q0: Vec<f64>,
}

impl PolePlacementTask {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        lambda_pre: Vec<Complex64>,
        q0: Vec<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || b.nrows() != n || c.ncols() != n {
            return Err(Error::structural(format!(
                "inconsistent task shapes A {:?}, B {:?}, C {:?}",
                a.shape(),
                b.shape(),
                c.shape()
            )));
        }
        if lambda_pre.len() != n {
            return Err(Error::structural(format!("{} target poles for order {n}", lambda_pre.len())));
        }
        if q0.len() != b.ncols() * c.nrows() {
            return Err(Error::structural(format!(
                "initial gain has {} entries, expected {}",
                q0.len(),
                b.ncols() * c.nrows()
            )));
        }
        if !is_conjugate_closed(&lambda_pre) {
            return Err(Error::domain("target poles are not closed under conjugation"));
        }
        Ok(Self { a, b, c, lambda_pre, q0 })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// `(rows, cols)` of the gain `F`.
    pub fn gain_shape(&self) -> (usize, usize) {
        (self.b.ncols(), self.c.nrows())
    }

    pub fn gain(&self, q: &[f64]) -> DMatrix<f64> {
        let (r, c) = self.gain_shape();
        DMatrix::from_row_slice(r, c, q)
    }

    pub fn closed_loop(&self, q: &[f64]) -> DMatrix<f64> {
        &self.a + &self.b * self.gain(q) * &self.c
    }
}

/// Every non-real entry has a distinct conjugate partner (relative
/// tolerance 1e-9).
pub fn is_conjugate_closed(v: &[Complex64]) -> bool {
    let scale = v.iter().map(|z| z.norm()).fold(1.0, f64::max);
    let tol = 1e-9 * scale;
    let mut used = vec![false; v.len()];
    for i in 0..v.len() {
        if used[i] || v[i].im.abs() <= tol {
            continue;
        }
        let partner = (0..v.len()).find(|&j| j != i && !used[j] && (v[j] - v[i].conj()).norm() <= tol);
        match partner {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// `h(q)` with the minimum-norm pairing.
pub fn residual(task: &PolePlacementTask, q: &[f64]) -> Result<f64> {
    let eigs: Vec<Complex64> = eigenvalues(&task.closed_loop(q))?.iter().copied().collect();
    let perm = assign_targets(&eigs, &task.lambda_pre)?;
    Ok(0.5 * assign::assignment_cost(&eigs, &task.lambda_pre, &perm))
}

fn eig_with_jacobian(task: &PolePlacementTask, q: &[f64]) -> Result<(Vec<Complex64>, CMatrix)> {
    let acl = task.closed_loop(q);
    let (vals, xe) = eigen_decomposition(&acl)?;
    let n = vals.len();
    let scale = vals.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for i in 0..n {
        for j in (i + 1)..n {
            if (vals[i] - vals[j]).norm() <= 1e-8 * scale {
                return Err(Error::DerivativeUnavailable(format!(
                    "repeated eigenvalue {} at the current gain",
                    vals[i]
                )));
            }
        }
    }
    let cond = condition_number(&xe).unwrap_or(f64::INFINITY);
    if cond > MAX_EIGENBASIS_CONDITION {
        return Err(Error::DerivativeUnavailable(format!("eigenvector matrix condition {cond:.3e}")));
    }
    let xinv = xe
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::DerivativeUnavailable("singular eigenvector matrix".into()))?;
    // ∂λ_i/∂q_m = [Xe⁻¹ B E_m C Xe]_ii = (Xe⁻¹B)[i, r] · (C Xe)[c, i], m = r·ny + c
    let left = &xinv * to_complex(&task.b);
    let right = to_complex(&task.c) * &xe;
    let (nu, ny) = task.gain_shape();
    let mut jac = CMatrix::zeros(n, nu * ny);
    for i in 0..n {
        for r in 0..nu {
            for c in 0..ny {
                jac[(i, r * ny + c)] = left[(i, r)] * right[(c, i)];
            }
        }
    }
    Ok((vals.iter().copied().collect(), jac))
}

/// Eigenvalue sensitivities: entry `(i, m)` is `∂λ_i/∂q_m`, rows in the order
/// of [`eigenvalues_at`].
pub fn eig_jacobian(task: &PolePlacementTask, q: &[f64]) -> Result<CMatrix> {
    eig_with_jacobian(task, q).map(|(_, j)| j)
}

/// Eigenvalues of `A(q)` in the order used by [`eig_jacobian`].
pub fn eigenvalues_at(task: &PolePlacementTask, q: &[f64]) -> Result<Vec<Complex64>> {
    Ok(eigen_decomposition(&task.closed_loop(q))?.0.iter().copied().collect())
}

struct Linearization {
    h: f64,
    g: DVector<f64>,
    hess: DMatrix<f64>,
}

fn linearize(task: &PolePlacementTask, q: &[f64]) -> Result<Linearization> {
    let (eigs, jac) = eig_with_jacobian(task, q)?;
    let perm = assign_targets(&eigs, &task.lambda_pre)?;
    let r: Vec<Complex64> = eigs.iter().zip(&perm).map(|(l, &j)| l - task.lambda_pre[j]).collect();
    let m = jac.ncols();
    let g = DVector::from_iterator(
        m,
        (0..m).map(|k| r.iter().enumerate().map(|(i, ri)| (ri.conj() * jac[(i, k)]).re).sum()),
    );
    let hess = (jac.adjoint() * &jac).map(|z| z.re);
    let hess = (&hess + hess.transpose()) * 0.5;
    let h = 0.5 * r.iter().map(|z| z.norm_sqr()).sum::<f64>();
    Ok(Linearization { h, g, hess })
}

/// `g_m = Re Σ conj(r_i) ∂λ_i/∂q_m` and `H = Re(JᴴJ)` at `q`, with
/// `r_i = λ_i - t_π(i)` under the minimum-norm pairing.
pub fn gradient_and_hessian(task: &PolePlacementTask, q: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let lin = linearize(task, q)?;
    Ok((lin.g, lin.hess))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionParams {
    /// Largest admissible radius Δ̂.
    pub delta_hat: f64,
    pub delta0: f64,
    /// Acceptance threshold on the reduction ratio, in `[0, 1/4)`.
    pub eta: f64,
    pub max_iter: usize,
    pub residual_tol: f64,
}

impl Default for TrustRegionParams {
    fn default() -> Self {
        Self { delta_hat: 10.0, delta0: 1.0, eta: 1e-4, max_iter: 300, residual_tol: 1e-10 }
    }
}

impl TrustRegionParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.delta_hat > 0.0
            && self.delta0 > 0.0
            && self.delta0 < self.delta_hat
            && (0.0..0.25).contains(&self.eta)
            && self.residual_tol >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::domain(format!("invalid trust-region parameters {self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmStop {
    ResidualTolerance,
    MaxIterations,
    /// 20 consecutive rejected steps.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmIteration {
    /// Residual at the start of the iteration.
    pub h: f64,
    pub delta: f64,
    pub step_norm: f64,
    /// Reduction ratio; `None` when the predicted reduction was negligible.
    pub ratio: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmOutcome {
    pub q: Vec<f64>,
    pub h: f64,
    pub stop: LmStop,
    pub trace: Vec<LmIteration>,
}

const MAX_REJECTIONS: usize = 20;

/// Trust-region Levenberg–Marquardt on `h(q)` starting at `task.q0`.
///
/// Fails with [`Error::DerivativeUnavailable`] if the eigenbasis at `q0`
/// is defective or ill conditioned.
pub fn levenberg_marquardt(task: &PolePlacementTask, params: &TrustRegionParams) -> Result<LmOutcome> {
    params.validate()?;
    let mut q = DVector::from_column_slice(&task.q0);
    let mut lin = linearize(task, q.as_slice())?;
    let mut delta = params.delta0;
    let mut rejections = 0;
    let mut trace = Vec::new();

    let stop = loop {
        if lin.h <= params.residual_tol {
            break LmStop::ResidualTolerance;
        }
        if trace.len() >= params.max_iter {
            break LmStop::MaxIterations;
        }
        if rejections >= MAX_REJECTIONS {
            break LmStop::Stalled;
        }
        let p = tr_subproblem(&lin.g, &lin.hess, delta);
        let pn = p.norm();
        let predicted = -(lin.g.dot(&p) + p.dot(&(&lin.hess * &p)));
        let mut record = LmIteration { h: lin.h, delta, step_norm: pn, ratio: None, accepted: false };
        if !(predicted > 1e-16) {
            delta /= 4.0;
            rejections += 1;
            trace.push(record);
            continue;
        }
        let trial = &q + &p;
        let h_new = residual(task, trial.as_slice()).unwrap_or(f64::INFINITY);
        let phi = (lin.h - h_new) / predicted;
        record.ratio = Some(phi);

        if phi > params.eta {
            match linearize(task, trial.as_slice()) {
                Ok(next) => {
                    q = trial;
                    lin = next;
                    record.accepted = true;
                }
                Err(_) if h_new <= params.residual_tol => {
                    // converged onto a point without usable derivatives
                    q = trial;
                    lin.h = h_new;
                    record.accepted = true;
                }
                Err(_) => {}
            }
        }
        if !record.accepted || phi < 0.25 {
            delta /= 4.0;
        } else if phi > 0.75 && pn >= delta * (1.0 - 1e-9) {
            delta = (2.0 * delta).min(params.delta_hat);
        }
        rejections = if record.accepted { 0 } else { rejections + 1 };
        trace.push(record);
    };
    Ok(LmOutcome { q: q.iter().copied().collect(), h: lin.h, stop, trace })
}

/// Residual level at which a recovered gain counts as placing the poles.
pub const RECOVERY_TOL: f64 = 1e-8;

/// Runs Levenberg–Marquardt from up to `attempts` random starts (entries
/// uniform in the gain bounds) and returns the first gain that places the
/// poles to [`RECOVERY_TOL`] while staying inside the bounds.
pub fn recover_gain<R: Rng + ?Sized>(
    channel: &PoleChannel,
    block: &GainBlock,
    lambda_pre: &[Complex64],
    attempts: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    let (lo, hi) = (block.entry_lower, block.entry_upper);
    let params = TrustRegionParams::default();
    let template = PolePlacementTask::new(
        channel.a.clone(),
        channel.b.clone(),
        channel.c.clone(),
        lambda_pre.to_vec(),
        vec![0.0; block.len()],
    )?;
    for _ in 0..attempts {
        let q0: Vec<f64> = (0..block.len()).map(|_| rng.random_range(lo..=hi)).collect();
        let task = PolePlacementTask { q0, ..template.clone() };
        let Ok(out) = levenberg_marquardt(&task, &params) else {
            continue;
        };
        if out.h <= RECOVERY_TOL && out.q.iter().all(|v| (lo..=hi).contains(v)) {
            return Ok(task.gain(&out.q));
        }
    }
    Err(Error::RecoverFailed { attempts })
}

/// Draws a conjugate-closed pole vector from the channel's box
/// `[-sigma_min, 0) × [-omega_max, omega_max]`. A fair coin decides between
/// a complex pair and a real pole while at least two slots remain.
pub fn sample_pole_vector<R: Rng + ?Sized>(channel: &PoleChannel, rng: &mut R) -> Vec<Complex64> {
    let n = channel.a.nrows();
    let mut poles = Vec::with_capacity(n);
    while poles.len() < n {
        let sigma = -channel.sigma_min * (1.0 - rng.random::<f64>());
        if n - poles.len() >= 2 && channel.omega_max > 0.0 && rng.random_bool(0.5) {
            let omega = channel.omega_max * (1.0 - rng.random::<f64>());
            poles.push(Complex64::new(sigma, omega));
            poles.push(Complex64::new(sigma, -omega));
        } else {
            poles.push(Complex64::new(sigma, 0.0));
        }
    }
    poles
}
