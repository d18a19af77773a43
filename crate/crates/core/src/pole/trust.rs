use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Minimizer of `gᵀp + pᵀHp` over `‖p‖₂ ≤ delta` for symmetric `H`.
///
/// The model keeps `pᵀHp` without a ½, so the stationarity condition reads
/// `(2H + νI)p = -g`. Solved in the eigenbasis of `2H`: the secular equation
/// `1/‖p(ν)‖ = 1/delta` is driven by safeguarded Newton, with the usual hard
/// case when `g` has no component along the lowest eigenvector.
pub fn tr_subproblem(g: &DVector<f64>, h: &DMatrix<f64>, delta: f64) -> DVector<f64> {
    let n = g.len();
    assert!(delta > 0.0, "trust-region radius must be positive");
    assert_eq!(h.shape(), (n, n), "gradient and Hessian sizes differ");
    if n == 0 {
        return DVector::zeros(0);
    }
    let eig = SymmetricEigen::new(h + h.transpose());
    let d = eig.eigenvalues;
    let q = eig.eigenvectors;
    let gamma = q.transpose() * g;
    let scale = d.iter().map(|x| x.abs()).fold(1.0, f64::max);
    let d_min = d.iter().copied().fold(f64::INFINITY, f64::min);
    let flat = 1e-12 * scale;

    let step = |nu: f64| -> DVector<f64> {
        let coeffs = DVector::from_iterator(n, (0..n).map(|i| {
            let den = d[i] + nu;
            if den.abs() <= flat {
                0.0
            } else {
                -gamma[i] / den
            }
        }));
        &q * coeffs
    };

    let g_norm = g.norm();
    if g_norm == 0.0 {
        if d_min >= 0.0 {
            return DVector::zeros(n);
        }
        // pure negative curvature: go to the boundary along it
        let i = (0..n).min_by(|&a, &b| d[a].total_cmp(&d[b])).unwrap_or(0);
        return q.column(i) * delta;
    }

    let nu_lo = (-d_min).max(0.0);
    if d_min > flat {
        let p = step(0.0);
        if p.norm() <= delta {
            return p;
        }
    } else {
        // singular or indefinite: check the hard case at ν = -d_min
        let null: Vec<usize> = (0..n).filter(|&i| d[i] - d_min <= flat).collect();
        let g_null = null.iter().map(|&i| gamma[i] * gamma[i]).sum::<f64>().sqrt();
        if g_null <= 1e-12 * g_norm {
            let p = step(nu_lo);
            let pn = p.norm();
            if pn <= delta {
                if d_min >= -flat {
                    return p;
                }
                let tau = (delta * delta - pn * pn).max(0.0).sqrt();
                return p + q.column(null[0]) * tau;
            }
        }
    }

    let norm_at = |nu: f64| -> (f64, f64) {
        let mut s2 = 0.0;
        let mut s3 = 0.0;
        for i in 0..n {
            let den = d[i] + nu;
            s2 += gamma[i] * gamma[i] / (den * den);
            s3 += gamma[i] * gamma[i] / (den * den * den);
        }
        (s2.sqrt(), s3)
    };

    let mut lo = nu_lo;
    let mut hi = (g_norm / delta - d_min).max(nu_lo) + flat;
    let mut nu = if d_min > flat { 0.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let (pn, s3) = norm_at(nu);
        if !pn.is_finite() {
            lo = nu;
            nu = 0.5 * (lo + hi);
            continue;
        }
        if (pn - delta).abs() <= 1e-14 * delta {
            break;
        }
        if pn > delta {
            lo = nu;
        } else {
            hi = nu;
        }
        // Newton on φ(ν) = 1/‖p‖ - 1/delta, with φ' = s3 / ‖p‖³
        let phi = 1.0 / pn - 1.0 / delta;
        let dphi = s3 / (pn * pn * pn);
        let mut next = nu - phi / dphi;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if (next - nu).abs() <= f64::EPSILON * nu.abs().max(1.0) {
            break;
        }
        nu = next;
    }
    step(nu)
}
