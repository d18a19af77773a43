//! Primal-dual path-following interior-point solver for
//! `min λ  s.t.  F_b(x) ⪯ λI` over every block `b`.
//!
//! The problem is posed in the dual (inequality) form of a linear SDP with
//! `y = (λ, x)`, slack `S_b = λI - F_b(x)` and primal multiplier `Z` with
//! `tr Z = 1`, `⟨F_i, Z⟩ = 0`. Iterates start dual feasible and stay so, which
//! makes every iterate a certificate: `S ≻ 0` means `F(x) ≺ λI` holds for the
//! current `(λ, x)`. Search directions use the HKM scaling with a Mehrotra
//! predictor-corrector step.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::amf::AffineMatrixFunction;
use crate::error::{Error, Result};
use crate::linalg::max_eig_sym;

#[derive(Debug, Clone, PartialEq)]
pub struct EvpOptions {
    /// Relative duality-gap and primal-residual tolerance.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Stop as soon as a certified `λ ≤ lambda_stop` is reached. Downstream
    /// code only needs the sign of `λ*`. `f64::NEG_INFINITY` disables it.
    pub lambda_stop: f64,
    /// `λ` below this value is reported as unbounded below.
    pub unbounded_threshold: f64,
}

impl Default for EvpOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-7,
            max_iterations: 200,
            lambda_stop: -1e-3,
            unbounded_threshold: -1e6,
        }
    }
}

impl EvpOptions {
    /// Default options with early exit disabled, for when the value of `λ*`
    /// itself is wanted.
    pub fn exact() -> Self {
        Self { lambda_stop: f64::NEG_INFINITY, ..Self::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvpStatus {
    Converged,
    /// A certified `λ ≤ lambda_stop` was found before convergence.
    EarlyExitFeasible,
    UnboundedBelow,
    MaxIterations,
}

impl EvpStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvpStatus::Converged => "converged",
            EvpStatus::EarlyExitFeasible => "early_exit_feasible",
            EvpStatus::UnboundedBelow => "unbounded_below",
            EvpStatus::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvpResult {
    /// For every status other than `Converged` this is the value of the last
    /// iterate, an upper bound on the true minimum.
    pub lambda_star: f64,
    pub x_star: Vec<f64>,
    pub status: EvpStatus,
    pub iterations: usize,
    pub duality_gap: f64,
    pub primal_residual: f64,
}

struct Block {
    n: usize,
    /// `(k, A_k)` for every `y_k` that touches this block; `k = 0` is λ.
    mats: Vec<(usize, DMatrix<f64>)>,
    f0: DMatrix<f64>,
}

pub fn solve_evp(amf: &AffineMatrixFunction, opts: &EvpOptions) -> Result<EvpResult> {
    let m = amf.internal_dim();
    let ny = m + 1;
    if amf.blocks().is_empty() {
        return Err(Error::structural("EVP without blocks"));
    }
    for b in amf.blocks() {
        let bad = !b.constant.iter().all(|v| v.is_finite())
            || b.terms.iter().any(|(_, f)| !f.iter().all(|v| v.is_finite()));
        if bad {
            return Err(Error::Numerical("non-finite coefficient in EVP data".into()));
        }
    }
    let blocks: Vec<Block> = amf
        .blocks()
        .iter()
        .map(|b| {
            let n = b.order();
            let mut mats = vec![(0, -DMatrix::<f64>::identity(n, n))];
            mats.extend(b.terms.iter().map(|(i, f)| (i + 1, f.clone())));
            Block { n, mats, f0: b.constant.clone() }
        })
        .collect();
    let n_tot: usize = blocks.iter().map(|b| b.n).sum();

    // b = (-1, 0, …, 0): maximize -λ
    let mut rhs_b = DVector::zeros(ny);
    rhs_b[0] = -1.0;

    let lmax0 = blocks.iter().map(|b| max_eig_sym(&b.f0)).fold(f64::NEG_INFINITY, f64::max);
    let spread = blocks
        .iter()
        .map(|b| b.f0.amax())
        .fold(0.0, f64::max);
    let mut y = DVector::zeros(ny);
    y[0] = lmax0 + 1.0 + spread;
    let mut z: Vec<DMatrix<f64>> = blocks
        .iter()
        .map(|b| DMatrix::identity(b.n, b.n) / n_tot as f64)
        .collect();

    let slack = |y: &DVector<f64>| -> Vec<DMatrix<f64>> {
        blocks
            .iter()
            .map(|b| {
                let mut s = -&b.f0;
                for (k, a) in &b.mats {
                    s -= a * y[*k];
                }
                s
            })
            .collect()
    };
    let apply_a = |mats: &[DMatrix<f64>]| -> DVector<f64> {
        let mut out = DVector::zeros(ny);
        for (b, x) in blocks.iter().zip(mats) {
            for (k, a) in &b.mats {
                out[*k] += a.dot(x);
            }
        }
        out
    };

    let mut s = slack(&y);
    let mut iterations = 0;
    let mut gap;
    let mut rp_norm;

    loop {
        gap = z.iter().zip(&s).map(|(zb, sb)| zb.dot(sb)).sum::<f64>();
        let rp = &rhs_b - apply_a(&z);
        rp_norm = rp.amax();
        let lambda = y[0];

        let finish = |status: EvpStatus, y: &DVector<f64>, gap: f64, rp: f64, it: usize| EvpResult {
            lambda_star: y[0],
            x_star: y.rows(1, m).iter().copied().collect(),
            status,
            iterations: it,
            duality_gap: gap,
            primal_residual: rp,
        };

        if gap <= opts.tolerance * (1.0 + lambda.abs()) && rp_norm <= opts.tolerance {
            return Ok(finish(EvpStatus::Converged, &y, gap, rp_norm, iterations));
        }
        if lambda <= opts.lambda_stop {
            return Ok(finish(EvpStatus::EarlyExitFeasible, &y, gap, rp_norm, iterations));
        }
        if lambda < opts.unbounded_threshold {
            return Ok(finish(EvpStatus::UnboundedBelow, &y, gap, rp_norm, iterations));
        }
        if iterations >= opts.max_iterations {
            return Ok(finish(EvpStatus::MaxIterations, &y, gap, rp_norm, iterations));
        }
        iterations += 1;

        let mu = gap / n_tot as f64;
        let s_inv: Vec<DMatrix<f64>> = s
            .iter()
            .map(|sb| {
                Cholesky::new(sb.clone())
                    .map(|c| c.inverse())
                    .ok_or_else(|| breakdown("slack lost positive definiteness", &y, &z))
            })
            .collect::<Result<_>>()?;

        // Schur complement M_kl = Σ_b ⟨A_k, Z A_l S⁻¹⟩
        let mut schur = DMatrix::zeros(ny, ny);
        for (bi, b) in blocks.iter().enumerate() {
            let zs: Vec<(usize, DMatrix<f64>)> = b
                .mats
                .iter()
                .map(|(l, a)| (*l, &z[bi] * a * &s_inv[bi]))
                .collect();
            for (k, ak) in &b.mats {
                for (l, g) in &zs {
                    schur[(*k, *l)] += ak.dot(g);
                }
            }
        }
        let schur = (&schur + schur.transpose()) * 0.5;
        let chol = factor_schur(schur).ok_or_else(|| breakdown("Schur complement not positive definite", &y, &z))?;

        let direction = |rhs_mats: &[DMatrix<f64>]| -> (DVector<f64>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
            // rhs_mats is the part of ΔZ that does not depend on Δy
            let rhs = &rp - apply_a(rhs_mats);
            let dy = chol.solve(&rhs);
            let ds: Vec<DMatrix<f64>> = blocks
                .iter()
                .map(|b| {
                    let mut d = DMatrix::zeros(b.n, b.n);
                    for (k, a) in &b.mats {
                        d -= a * dy[*k];
                    }
                    d
                })
                .collect();
            let dz: Vec<DMatrix<f64>> = (0..blocks.len())
                .map(|bi| {
                    let raw = &rhs_mats[bi] - &z[bi] * &ds[bi] * &s_inv[bi];
                    (&raw + raw.transpose()) * 0.5
                })
                .collect();
            (dy, ds, dz)
        };

        // predictor
        let base_aff: Vec<DMatrix<f64>> = z.iter().map(|zb| -zb).collect();
        let (_, ds_a, dz_a) = direction(&base_aff);
        let ap = max_step(&z, &dz_a).min(1.0);
        let ad = max_step(&s, &ds_a).min(1.0);
        let mu_aff = z
            .iter()
            .zip(&dz_a)
            .zip(s.iter().zip(&ds_a))
            .map(|((zb, dzb), (sb, dsb))| (zb + dzb * ap).dot(&(sb + dsb * ad)))
            .sum::<f64>()
            / n_tot as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // corrector
        let base: Vec<DMatrix<f64>> = (0..blocks.len())
            .map(|bi| &s_inv[bi] * (sigma * mu) - &z[bi] - &dz_a[bi] * &ds_a[bi] * &s_inv[bi])
            .collect();
        let (dy, ds, dz) = direction(&base);
        let ap = (0.95 * max_step(&z, &dz)).min(1.0);
        let mut ad = (0.95 * max_step(&s, &ds)).min(1.0);

        for (zb, dzb) in z.iter_mut().zip(&dz) {
            *zb += dzb * ap;
            *zb = (&*zb + zb.transpose()) * 0.5;
        }
        // recompute the slack from y so that dual feasibility never drifts
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &y + &dy * ad;
            let s_trial = slack(&trial);
            if s_trial.iter().all(|sb| Cholesky::new(sb.clone()).is_some()) {
                y = trial;
                s = s_trial;
                accepted = true;
                break;
            }
            ad *= 0.5;
        }
        if !accepted {
            return Err(breakdown("no positive-definite dual step", &y, &z));
        }
    }
}

fn factor_schur(m: DMatrix<f64>) -> Option<Cholesky<f64, nalgebra::Dyn>> {
    if let Some(c) = Cholesky::new(m.clone()) {
        return Some(c);
    }
    let scale = (0..m.nrows()).map(|i| m[(i, i)].abs()).fold(1.0, f64::max);
    for delta in [1e-14, 1e-12, 1e-10, 1e-8] {
        let reg = &m + DMatrix::identity(m.nrows(), m.ncols()) * (delta * scale);
        if let Some(c) = Cholesky::new(reg) {
            return Some(c);
        }
    }
    None
}

/// Largest `α` with `X + α·D ⪰ 0` for every block (∞ if unconstrained).
fn max_step(x: &[DMatrix<f64>], d: &[DMatrix<f64>]) -> f64 {
    let mut alpha = f64::INFINITY;
    for (xb, db) in x.iter().zip(d) {
        let Some(chol) = Cholesky::new(xb.clone()) else {
            return 0.0;
        };
        let l = chol.l();
        let Some(linv) = l.clone().try_inverse() else {
            return 0.0;
        };
        let w = &linv * db * linv.transpose();
        let w = (&w + w.transpose()) * 0.5;
        let lmin = -max_eig_sym(&(-w));
        if lmin < 0.0 {
            alpha = alpha.min(-1.0 / lmin);
        }
    }
    alpha
}

fn breakdown(what: &str, y: &DVector<f64>, z: &[DMatrix<f64>]) -> Error {
    let dump = format!(
        "y = {:?}\nZ blocks = {:?}",
        y.as_slice(),
        z.iter().map(|m| m.as_slice().to_vec()).collect::<Vec<_>>()
    );
    Error::Solver { message: format!("EVP numerical breakdown: {what}"), dump }
}
