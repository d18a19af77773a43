//! Independent oracles shared by the integration tests. None of these call
//! back into the routines they check.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use mrv::control::{ClosedLoop, PlantModel};
use mrv::lmi::{AffineMatrixFunction, AmfBlock};

pub type CMatrix = DMatrix<Complex64>;

pub fn uniform_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

pub fn uniform_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = uniform_matrix(rng, n, n, -1.0, 1.0);
    (&m + m.transpose()) * 0.5
}

/// Characteristic polynomial coefficients `[1, c1, .., cn]` by the
/// Faddeev–LeVerrier recursion.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let eye = DMatrix::<f64>::identity(n, n);
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + &eye * coeffs[k - 1];
        let c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Roots of a monic polynomial by Durand–Kerner iteration.
pub fn poly_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex64| coeffs.iter().fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c);
    let radius = 1.0 + coeffs[1..].iter().map(|c| c.abs()).fold(0.0, f64::max);
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..n).map(|k| seed.powu(k as u32) * radius.min(10.0)).collect();
    for _ in 0..5000 {
        let mut delta: f64 = 0.0;
        for i in 0..n {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..n {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 * radius {
            break;
        }
    }
    z
}

/// Spectral abscissa through the characteristic polynomial instead of a
/// matrix eigensolver.
pub fn abscissa_via_polynomial(a: &DMatrix<f64>) -> f64 {
    poly_roots(&char_poly(a)).iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

/// `C (iωI − A)⁻¹ B + D`.
pub fn freq_response(cl: &ClosedLoop, w: f64) -> CMatrix {
    let n = cl.a_f.nrows();
    let to_c = |m: &DMatrix<f64>| m.map(|x| Complex64::new(x, 0.0));
    let s = CMatrix::identity(n, n) * Complex64::new(0.0, w) - to_c(&cl.a_f);
    let x = s.lu().solve(&to_c(&cl.b1)).expect("resolvent exists off the spectrum");
    to_c(&cl.c_f) * x + to_c(&cl.d11)
}

fn fro2(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn sigma_max_c(m: &CMatrix) -> f64 {
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// `‖G‖₂² = (1/π) ∫₀^∞ ‖G(iω)‖_F² dω` by Simpson's rule on a log grid over
/// `[1e-4, 1e4]` with closed-form tails.
pub fn h2_by_quadrature(cl: &ClosedLoop) -> f64 {
    let (t0, t1) = (-4.0f64, 4.0f64);
    let n = 40_000usize;
    let dt = (t1 - t0) / n as f64;
    let integrand = |t: f64| {
        let w = 10f64.powf(t);
        fro2(&freq_response(cl, w)) * w * std::f64::consts::LN_10
    };
    let mut s = integrand(t0) + integrand(t1);
    for k in 1..n {
        s += integrand(t0 + k as f64 * dt) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let mut integral = s * dt / 3.0;
    integral += fro2(&freq_response(cl, 0.0)) * 10f64.powf(t0);
    integral += (&cl.c_f * &cl.b1).norm_squared() / 10f64.powf(t1);
    (integral / std::f64::consts::PI).sqrt()
}

/// `max_ω σmax(G(iω))` from a dense log grid followed by golden-section
/// refinement around the best few grid points.
pub fn hinf_by_grid(cl: &ClosedLoop) -> f64 {
    let f = |w: f64| sigma_max_c(&freq_response(cl, w));
    let grid: Vec<f64> = std::iter::once(0.0)
        .chain((0..=8000).map(|k| 10f64.powf(-4.0 + 8.0 * k as f64 / 8000.0)))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&w| f(w)).collect();
    let mut order: Vec<usize> = (0..grid.len()).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let mut best = vals[order[0]];
    for &k in order.iter().take(5) {
        let lo = if k == 0 { 0.0 } else { grid[k - 1] };
        let hi = grid[(k + 1).min(grid.len() - 1)];
        best = best.max(golden_max(&f, lo, hi));
    }
    best
}

fn golden_max(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() <= 1e-13 * b.abs().max(1e-12) {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Random Hurwitz matrix: a random matrix shifted left past its abscissa.
pub fn random_hurwitz(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let m = uniform_matrix(rng, n, n, -1.0, 1.0);
    let shift = abscissa_via_polynomial(&m) + rng.random_range(0.2..1.0);
    m - DMatrix::identity(n, n) * shift
}

pub fn random_stable_loop(rng: &mut ChaCha8Rng, n: usize, nw: usize, nz: usize, feedthrough: bool) -> ClosedLoop {
    let a = random_hurwitz(rng, n);
    let b = uniform_matrix(rng, n, nw, -1.0, 1.0);
    let c = uniform_matrix(rng, nz, n, -1.0, 1.0);
    let d = if feedthrough { uniform_matrix(rng, nz, nw, -0.5, 0.5) } else { DMatrix::zeros(nz, nw) };
    ClosedLoop::new(a, b, c, d).unwrap()
}

/// An open-loop unstable plant with two inputs and full-state outputs plus a
/// performance channel.
pub fn unstable_plant(name: &str, n: usize, rng: &mut ChaCha8Rng) -> PlantModel {
    let a = uniform_matrix(rng, n, n, -1.0, 1.0) + DMatrix::identity(n, n) * 0.5;
    let b = uniform_matrix(rng, n, 2.min(n), -1.0, 1.0);
    PlantModel::new(
        name,
        a,
        uniform_matrix(rng, n, 1, -1.0, 1.0),
        b,
        uniform_matrix(rng, 1, n, -1.0, 1.0),
        DMatrix::identity(n, n),
        DMatrix::zeros(1, 1),
        uniform_matrix(rng, 1, 2.min(n), -0.5, 0.5),
    )
    .unwrap()
}

/// Random matrix function over at most two internal entries whose maximum
/// eigenvalue is coercive, so the minimum exists. Returns the function and a
/// box radius containing every minimizer.
pub fn random_bounded_amf(rng: &mut ChaCha8Rng) -> (AffineMatrixFunction, f64) {
    let k = rng.random_range(1..=2usize);
    let m = rng.random_range(1..=3usize);
    let mut blocks = vec![AmfBlock::new(uniform_sym(rng, m), (0..k).map(|i| (i, uniform_sym(rng, m))).collect())];
    let mut cmax: f64 = 0.0;
    for i in 0..k {
        let s = rng.random_range(0.5..2.0);
        let c = uniform_sym(rng, 2);
        cmax = cmax.max(c.amax());
        blocks.push(AmfBlock::new(c, vec![(i, DMatrix::from_diagonal(&DVector::from_vec(vec![s, -s])))]));
    }
    let amf = AffineMatrixFunction::new(k, vec![], blocks).unwrap();
    let at_zero = amf.max_eigenvalue(&vec![0.0; k]);
    // λ(x) ≥ 0.5|x_i| − 2·cmax, and the minimum is at most λ(0)
    let radius = 2.0 * (at_zero + 2.0 * cmax) + 1.0;
    (amf, radius)
}

/// `min_x λmax(F(x))` by a grid over `[−R, R]^k`, refined six times around
/// the best few points, each level shrinking the step about seventeenfold.
pub fn evp_by_grid(amf: &AffineMatrixFunction, radius: f64) -> f64 {
    let k = amf.internal_dim();
    let f = |x: &[f64]| amf.max_eigenvalue(x);
    let points = 100usize;
    let mut centers = vec![vec![0.0; k]];
    let mut half = radius;
    let mut best = f64::INFINITY;
    for _level in 0..7 {
        let h = 2.0 * half / points as f64;
        let mut scored: Vec<(f64, Vec<f64>)> = Vec::new();
        for c in &centers {
            let axis: Vec<f64> = (0..=points).map(|i| -half + i as f64 * h).collect();
            let mut idx = vec![0usize; k];
            loop {
                let x: Vec<f64> = (0..k).map(|d| c[d] + axis[idx[d]]).collect();
                scored.push((f(&x), x));
                let mut d = 0;
                while d < k {
                    idx[d] += 1;
                    if idx[d] <= points {
                        break;
                    }
                    idx[d] = 0;
                    d += 1;
                }
                if d == k {
                    break;
                }
            }
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0));
        best = best.min(scored[0].0);
        centers = scored.into_iter().take(3).map(|(_, x)| x).collect();
        half = 3.0 * h;
    }
    best
}

/// Conjugate-closed random poles in `[−σ, −0.1] × [−ω, ω]`.
pub fn random_poles(rng: &mut ChaCha8Rng, n: usize, sigma: f64, omega: f64) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let re = -rng.random_range(0.1..sigma);
        if n - out.len() >= 2 && rng.random_bool(0.5) {
            let im = rng.random_range(0.1..omega);
            out.push(Complex64::new(re, im));
            out.push(Complex64::new(re, -im));
        } else {
            out.push(Complex64::new(re, 0.0));
        }
    }
    out
}
