use rand::seq::IndexedRandom;
use rand::Rng;

/// Crowding value `(α_i)_av = Σ_j c_ij` for every row, where `c_ij` is the
/// gap between the nearest strictly larger and strictly smaller values in
/// objective `j`, normalized by that objective's range. A point with no
/// neighbour on one side, or a dimension with zero range, contributes `N`
/// (the number of objectives).
pub fn crowding_values(rows: &[&[f64]]) -> Vec<f64> {
    let Some(first) = rows.first() else {
        return Vec::new();
    };
    let n_obj = first.len();
    let fallback = n_obj as f64;
    let mut out = vec![0.0; rows.len()];
    for j in 0..n_obj {
        let (lo, hi) = rows
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
        let range = hi - lo;
        for (i, r) in rows.iter().enumerate() {
            let v = r[j];
            let above = rows.iter().map(|o| o[j]).filter(|&x| x > v).fold(f64::INFINITY, f64::min);
            let below = rows.iter().map(|o| o[j]).filter(|&x| x < v).fold(f64::NEG_INFINITY, f64::max);
            let c = if range > 0.0 && above.is_finite() && below.is_finite() {
                (above - below) / range
            } else {
                fallback
            };
            out[i] += c;
        }
    }
    out
}

/// Removes members with the least crowding value, one at a time with
/// recomputation, until `n_target` remain. Ties are broken uniformly at
/// random. Rows of length zero (pure feasibility problems) carry no density
/// information, so removal is then uniform.
///
/// Returns the indices (into `rows`) of the survivors in ascending order.
pub fn density_reduce<R: Rng + ?Sized>(rows: &[&[f64]], n_target: usize, rng: &mut R) -> Vec<usize> {
    let mut alive: Vec<usize> = (0..rows.len()).collect();
    while alive.len() > n_target.max(1) {
        let victim = if rows[alive[0]].is_empty() {
            rng.random_range(0..alive.len())
        } else {
            let current: Vec<&[f64]> = alive.iter().map(|&i| rows[i]).collect();
            let c = crowding_values(&current);
            let least = c.iter().copied().fold(f64::INFINITY, f64::min);
            let ties: Vec<usize> = (0..c.len()).filter(|&k| c[k] == least).collect();
            *ties.choose(rng).expect("at least one minimum")
        };
        alive.remove(victim);
    }
    alive
}
