use super::check_updates;
use crate::clustering::squared_euclidean;
use crate::error::{Error, Result};

/// Krum score of each update: the summed squared distance to its
/// `m - f - 2` nearest other updates.
pub fn krum_scores(updates: &[&[f64]], f: usize) -> Result<Vec<f64>> {
    check_updates(updates)?;
    let m = updates.len();
    if m < f + 3 {
        return Err(Error::config(format!("multi-Krum needs m >= f + 3 (m = {m}, f = {f})")));
    }
    let neighbours = m - f - 2;
    Ok((0..m)
        .map(|i| {
            let mut d: Vec<f64> = (0..m)
                .filter(|&j| j != i)
                .map(|j| squared_euclidean(updates[i], updates[j]))
                .collect();
            d.sort_by(f64::total_cmp);
            d[..neighbours].iter().sum()
        })
        .collect())
}

/// Indices (ascending) of the `m - f` updates with the lowest Krum scores;
/// ties prefer the lower index.
pub fn multi_krum_select(updates: &[&[f64]], f: usize) -> Result<Vec<usize>> {
    let scores = krum_scores(updates, f)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut chosen = order[..scores.len() - f].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}
