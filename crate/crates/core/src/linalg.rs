//! Small dense linear-algebra helpers shared across modules.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let mut worst = 0.0_f64;
    for i in 0..m.nrows() {
        for j in (i + 1)..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Largest eigenvalue of a symmetric matrix (empty matrix gives -inf).
pub fn max_eig_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_eig_sym(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .fold(0.0, f64::max)
}

pub fn to_complex(m: &DMatrix<f64>) -> CMatrix {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<CVector> {
    if !m.is_square() {
        return Err(Error::structural("eigenvalues of a non-square matrix"));
    }
    if m.nrows() == 0 {
        return Ok(CVector::zeros(0));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("real Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues())
}

/// Eigenvalues and unit-norm right eigenvectors (columns) of a real matrix,
/// computed from the complex Schur form by back substitution.
pub fn eigen_decomposition(m: &DMatrix<f64>) -> Result<(CVector, CMatrix)> {
    let n = m.nrows();
    if !m.is_square() {
        return Err(Error::structural("eigen decomposition of a non-square matrix"));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("non-finite matrix entry".into()));
    }
    if n == 0 {
        return Ok((CVector::zeros(0), CMatrix::zeros(0, 0)));
    }
    let schur = Schur::try_new(to_complex(m), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("complex Schur iteration did not converge".into()))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;

    let values = CVector::from_iterator(n, (0..n).map(|i| t[(i, i)]));
    let mut vecs = CMatrix::zeros(n, n);
    for k in 0..n {
        let mut v = CVector::zeros(n);
        v[k] = Complex64::new(1.0, 0.0);
        for i in (0..k).rev() {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in (i + 1)..=k {
                acc += t[(i, j)] * v[j];
            }
            let mut denom = t[(i, i)] - t[(k, k)];
            if denom.norm() < small {
                denom = Complex64::new(small, 0.0);
            }
            v[i] = -acc / denom;
        }
        let x = &q * v;
        let norm = x.norm();
        vecs.set_column(k, &(x / Complex64::new(norm, 0.0)));
    }
    Ok((values, vecs))
}

/// 1-norm condition number of a complex matrix; `None` when singular.
pub fn condition_number(m: &CMatrix) -> Option<f64> {
    let inv = m.clone().try_inverse()?;
    Some(one_norm(m) * one_norm(&inv))
}

fn one_norm(m: &CMatrix) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Kronecker product of two real matrices.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = DMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == 0.0 {
                continue;
            }
            out.view_mut((i * br, j * bc), (br, bc)).copy_from(&(b * aij));
        }
    }
    out
}

/// Builds a dense matrix from nested rows, checking rectangularity.
pub fn matrix_from_rows(rows: &[Vec<f64>], name: &str) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != ncols {
            return Err(Error::Parse {
                context: format!("matrix `{name}`"),
                message: format!("row {i} has {} entries, expected {ncols}", r.len()),
            });
        }
        if let Some(bad) = r.iter().position(|x| !x.is_finite()) {
            return Err(Error::Parse {
                context: format!("matrix `{name}`"),
                message: format!("entry ({i}, {bad}) is not finite"),
            });
        }
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}
