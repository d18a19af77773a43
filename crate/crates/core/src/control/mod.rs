//! Closed-loop assembly and norm evaluation for static output feedback
//! `u = F·y` on the plant
//!
//! ```text
//! ẋ = A x + B1 w + B u
//! z = C1 x + D11 w + D12 u
//! y = C x
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{eigenvalues, kron, sigma_max};

#[derive(Debug, Clone, PartialEq)]
pub struct PlantModel {
    pub name: String,
    pub a: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c1: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d11: DMatrix<f64>,
    pub d12: DMatrix<f64>,
}

impl PlantModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        a: DMatrix<f64>,
        b1: DMatrix<f64>,
        b: DMatrix<f64>,
        c1: DMatrix<f64>,
        c: DMatrix<f64>,
        d11: DMatrix<f64>,
        d12: DMatrix<f64>,
    ) -> Result<Self> {
        let plant = Self { name: name.into(), a, b1, b, c1, c, d11, d12 };
        plant.validate()?;
        Ok(plant)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        let (nw, nu, nz) = (self.b1.ncols(), self.b.ncols(), self.c1.nrows());
        let checks = [
            ("A", self.a.shape(), (n, n)),
            ("B1", self.b1.shape(), (n, nw)),
            ("B", self.b.shape(), (n, nu)),
            ("C1", self.c1.shape(), (nz, n)),
            ("C", self.c.shape(), (self.c.nrows(), n)),
            ("D11", self.d11.shape(), (nz, nw)),
            ("D12", self.d12.shape(), (nz, nu)),
        ];
        for (name, got, want) in checks {
            if got != want {
                return Err(Error::structural(format!(
                    "plant `{}`: {name} has shape {got:?}, expected {want:?}",
                    self.name
                )));
            }
        }
        if n == 0 {
            return Err(Error::structural(format!("plant `{}` has no states", self.name)));
        }
        Ok(())
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    /// `(rows, cols)` of a static output-feedback gain.
    pub fn gain_shape(&self) -> (usize, usize) {
        (self.b.ncols(), self.c.nrows())
    }
}

/// Closed loop `(A_F, B1, C_F, D11)` with `A_F = A + B·F·C`, `C_F = C1 + D12·F·C`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    pub a_f: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub c_f: DMatrix<f64>,
    pub d11: DMatrix<f64>,
}

impl ClosedLoop {
    /// Builds a closed loop from its matrices, checking shapes.
    pub fn new(a_f: DMatrix<f64>, b1: DMatrix<f64>, c_f: DMatrix<f64>, d11: DMatrix<f64>) -> Result<Self> {
        let n = a_f.nrows();
        if !a_f.is_square() || b1.nrows() != n || c_f.ncols() != n || d11.shape() != (c_f.nrows(), b1.ncols()) {
            return Err(Error::structural("inconsistent closed-loop shapes"));
        }
        Ok(Self { a_f, b1, c_f, d11 })
    }
}

pub fn closed_loop(plant: &PlantModel, f: &DMatrix<f64>) -> Result<ClosedLoop> {
    if f.shape() != plant.gain_shape() {
        return Err(Error::structural(format!(
            "gain has shape {:?}, plant `{}` needs {:?}",
            f.shape(),
            plant.name,
            plant.gain_shape()
        )));
    }
    let fc = f * &plant.c;
    Ok(ClosedLoop {
        a_f: &plant.a + &plant.b * &fc,
        b1: plant.b1.clone(),
        c_f: &plant.c1 + &plant.d12 * &fc,
        d11: plant.d11.clone(),
    })
}

/// `max Re λ(M)`.
pub fn spectral_abscissa(m: &DMatrix<f64>) -> Result<f64> {
    let eigs = eigenvalues(m)?;
    Ok(eigs.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max))
}

/// Solves `A·Q + Q·Aᵀ + W = 0` for Hurwitz `A` through the Kronecker form
/// `(I⊗A + A⊗I) vec(Q) = -vec(W)`.
pub fn lyapunov_solve(a: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if !a.is_square() || w.shape() != (n, n) {
        return Err(Error::structural("Lyapunov data must be square and of equal order"));
    }
    let alpha = spectral_abscissa(a)?;
    if alpha >= 0.0 {
        return Err(Error::domain(format!("Lyapunov solve needs a Hurwitz matrix, spectral abscissa {alpha}")));
    }
    let eye = DMatrix::identity(n, n);
    let op = kron(&eye, a) + kron(a, &eye);
    let rhs = -nalgebra::DVector::from_column_slice(w.as_slice());
    let sol = op
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Numerical("singular Lyapunov operator".into()))?;
    let q = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&q + q.transpose()) * 0.5)
}

/// `‖G‖₂ = sqrt(tr(C_F Q C_Fᵀ))` with `A_F Q + Q A_Fᵀ + B1 B1ᵀ = 0`;
/// `+∞` when `A_F` is not Hurwitz.
pub fn h2_norm(cl: &ClosedLoop) -> Result<f64> {
    if cl.d11.amax() != 0.0 {
        return Err(Error::domain("H2 norm is infinite for nonzero D11"));
    }
    if spectral_abscissa(&cl.a_f)? >= 0.0 {
        return Ok(f64::INFINITY);
    }
    let q = lyapunov_solve(&cl.a_f, &(&cl.b1 * cl.b1.transpose()))?;
    let t = (&cl.c_f * q * cl.c_f.transpose()).trace();
    Ok(t.max(0.0).sqrt())
}

/// Default relative tolerance of the H∞ bisection.
pub const HINF_TOL: f64 = 1e-6;

/// `‖G‖∞` by bisection on `γ` with the Hamiltonian test; `+∞` when `A_F`
/// is not Hurwitz. `tol` is the relative width of the final bracket.
pub fn hinf_norm(cl: &ClosedLoop, tol: f64) -> Result<f64> {
    let alpha = spectral_abscissa(&cl.a_f)?;
    if alpha >= 0.0 {
        return Ok(f64::INFINITY);
    }
    let d_norm = sigma_max(&cl.d11);
    if cl.b1.amax() == 0.0 || cl.c_f.amax() == 0.0 {
        return Ok(d_norm);
    }
    let mut lo = d_norm;
    let mut hi = sigma_max(&cl.c_f) * sigma_max(&cl.b1) / alpha.abs() + d_norm;
    // the bound above is exact for normal A_F only; widen until valid
    let mut widen = 0;
    while has_imaginary_eigenvalue(cl, hi)? {
        lo = hi;
        hi *= 2.0;
        widen += 1;
        if widen > 200 {
            return Err(Error::Numerical("H-infinity bracket did not close".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo <= tol * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if has_imaginary_eigenvalue(cl, mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Hamiltonian test: `γ > ‖G‖∞` iff `H(γ)` has no eigenvalue on the
/// imaginary axis (for Hurwitz `A_F` and `γ > σmax(D11)`).
fn has_imaginary_eigenvalue(cl: &ClosedLoop, gamma: f64) -> Result<bool> {
    let (a, b, c, d) = (&cl.a_f, &cl.b1, &cl.c_f, &cl.d11);
    let n = a.nrows();
    let nw = b.ncols();
    let r = DMatrix::identity(nw, nw) * (gamma * gamma) - d.transpose() * d;
    let r_inv = r
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular γ²I - DᵀD in Hamiltonian".into()))?;
    let a_h = a + b * &r_inv * d.transpose() * c;
    let nz = c.nrows();
    let s = DMatrix::identity(nz, nz) + d * &r_inv * d.transpose();
    let mut h = DMatrix::zeros(2 * n, 2 * n);
    h.view_mut((0, 0), (n, n)).copy_from(&a_h);
    h.view_mut((0, n), (n, n)).copy_from(&(b * &r_inv * b.transpose()));
    h.view_mut((n, 0), (n, n)).copy_from(&(-(c.transpose() * s * c)));
    h.view_mut((n, n), (n, n)).copy_from(&(-a_h.transpose()));
    let scale = h.norm().max(1.0);
    let eigs = eigenvalues(&h)?;
    Ok(eigs.iter().any(|z| z.re.abs() <= 1e-8 * scale))
}
