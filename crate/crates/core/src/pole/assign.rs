use num_complex::Complex64;

use crate::error::{Error, Result};

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with potentials, O(n³)). Returns `col[i]`, the column matched to row `i`.
///
/// # Panics
///
/// If any cost is not finite.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    if n == 0 {
        return Vec::new();
    }
    assert!(cost.iter().flatten().all(|c| c.is_finite()), "assignment costs must be finite");
    // 1-based internal arrays; row 0 / column 0 are sentinels
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut col = vec![0; n];
    for j in 1..=n {
        col[p[j] - 1] = j - 1;
    }
    col
}

fn half_plane(z: Complex64) -> i8 {
    if z.im > 0.0 {
        1
    } else if z.im < 0.0 {
        -1
    } else {
        0
    }
}

/// Pairs each eigenvalue with a target so that `Σ |λ_i - t_π(i)|²` is
/// minimal. `π[i]` is the target index for eigenvalue `i`. Ties are broken
/// toward pairings that keep eigenvalue and target in the same half plane,
/// so conjugate pairs go to conjugate targets.
pub fn assign_targets(eigs: &[Complex64], targets: &[Complex64]) -> Result<Vec<usize>> {
    if eigs.len() != targets.len() {
        return Err(Error::structural(format!(
            "{} eigenvalues but {} targets",
            eigs.len(),
            targets.len()
        )));
    }
    let base: Vec<Vec<f64>> = eigs
        .iter()
        .map(|l| targets.iter().map(|t| (l - t).norm_sqr()).collect())
        .collect();
    if base.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue or target".into()));
    }
    // normalized so the potentials cannot overflow
    let top = base.iter().flatten().copied().fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let eps = 1e-12;
    let cost: Vec<Vec<f64>> = eigs
        .iter()
        .zip(&base)
        .map(|(l, row)| {
            targets
                .iter()
                .zip(row)
                .map(|(t, c)| if half_plane(*l) == half_plane(*t) { c / top } else { c / top + eps })
                .collect()
        })
        .collect();
    Ok(hungarian(&cost))
}

pub(crate) fn assignment_cost(eigs: &[Complex64], targets: &[Complex64], perm: &[usize]) -> f64 {
    eigs.iter().zip(perm).map(|(l, &j)| (l - targets[j]).norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn nearest_neighbour_pairing() {
        let p = assign_targets(&[c(-1.0, 0.0), c(-2.0, 0.0)], &[c(-2.1, 0.0), c(-0.9, 0.0)]).unwrap();
        assert_eq!(p, vec![1, 0]);
    }

    #[test]
    fn conjugate_pairs_stay_consistent() {
        let p = assign_targets(&[c(-1.0, 2.0), c(-1.0, -2.0)], &[c(-1.0, -2.5), c(-1.0, 2.5)]).unwrap();
        assert_eq!(p, vec![1, 0]);
    }

    #[test]
    fn tie_prefers_same_half_plane() {
        // real eigenvalues equidistant from a conjugate target pair
        let p = assign_targets(&[c(0.0, 1.0), c(0.0, -1.0)], &[c(0.0, -1.0), c(0.0, 1.0)]).unwrap();
        assert_eq!(p, vec![1, 0]);
    }

    fn brute_force(eigs: &[Complex64], targets: &[Complex64]) -> f64 {
        fn rec(k: usize, used: &mut Vec<bool>, acc: f64, eigs: &[Complex64], t: &[Complex64], best: &mut f64) {
            if k == eigs.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..t.len() {
                if !used[j] {
                    used[j] = true;
                    rec(k + 1, used, acc + (eigs[k] - t[j]).norm_sqr(), eigs, t, best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(0, &mut vec![false; targets.len()], 0.0, eigs, targets, &mut best);
        best
    }

    #[test]
    fn matches_factorial_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.random_range(1..=6);
            let draw = |rng: &mut ChaCha8Rng| -> Vec<Complex64> {
                (0..n).map(|_| c(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect()
            };
            let e = draw(&mut rng);
            let t = draw(&mut rng);
            let p = assign_targets(&e, &t).unwrap();
            let mut seen = p.clone();
            seen.sort();
            assert_eq!(seen, (0..n).collect::<Vec<_>>());
            let got = assignment_cost(&e, &t, &p);
            let best = brute_force(&e, &t);
            assert!((got - best).abs() <= 1e-9 * (1.0 + best), "{got} vs {best}");
        }
    }

    #[test]
    fn length_mismatch_is_structural() {
        assert!(assign_targets(&[c(0.0, 0.0)], &[]).is_err());
    }

    #[test]
    fn non_finite_eigenvalue_is_numerical() {
        let err = assign_targets(&[c(f64::NAN, 0.0), c(1.0, 0.0)], &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap_err();
        assert!(matches!(err, Error::Numerical(_)));
        let huge = assign_targets(&[c(1e100, 0.0), c(-1e100, 0.0)], &[c(1e100, 0.0), c(0.0, 0.0)]).unwrap();
        assert_eq!(huge, vec![0, 1]);
    }
}
