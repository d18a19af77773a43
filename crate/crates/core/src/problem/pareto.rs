use crate::error::{Error, Result};

/// Pareto dominance: `u` is componentwise no worse than `v` and strictly
/// better in at least one component.
pub fn dominates(u: &[f64], v: &[f64]) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::structural(format!(
            "dominance between vectors of length {} and {}",
            u.len(),
            v.len()
        )));
    }
    Ok(dominates_unchecked(u, v))
}

pub(crate) fn dominates_unchecked(u: &[f64], v: &[f64]) -> bool {
    let mut strict = false;
    for (a, b) in u.iter().zip(v) {
        if a > b {
            return false;
        }
        if a < b {
            strict = true;
        }
    }
    strict
}

/// Indices of rows not dominated by any other row.
pub fn nondominated_indices(rows: &[&[f64]]) -> Vec<usize> {
    (0..rows.len())
        .filter(|&i| !(0..rows.len()).any(|j| j != i && dominates_unchecked(rows[j], rows[i])))
        .collect()
}
