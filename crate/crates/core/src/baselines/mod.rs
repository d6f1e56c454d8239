//! Comparison aggregators: coordinate-wise median, trimmed mean and repeated
//! median, multi-Krum, and FoolsGold re-weighting.
//!
//! Coordinate-wise rules take one flat parameter slice per peer and return the
//! aggregated flat vector.

mod foolsgold;
mod krum;
mod robust;

pub use foolsgold::{foolsgold_weights, FoolsGold};
pub use krum::{krum_scores, multi_krum_select};
pub use robust::{
    coord_median, median, repeated_median, repeated_median_of, trimmed_mean, trimmed_mean_of,
};

use crate::error::{Error, Result};

pub(crate) fn check_updates(updates: &[&[f64]]) -> Result<usize> {
    let first = updates.first().ok_or_else(|| Error::Aggregation("no updates to aggregate".into()))?;
    let len = first.len();
    if let Some(bad) = updates.iter().find(|u| u.len() != len) {
        return Err(Error::Shape { what: "update", expected: len, found: bad.len() });
    }
    Ok(len)
}

/// Applies `rule` to each coordinate's column of peer values.
pub(crate) fn coordinatewise<F>(updates: &[&[f64]], mut rule: F) -> Result<Vec<f64>>
where
    F: FnMut(&mut [f64]) -> Result<f64>,
{
    let len = check_updates(updates)?;
    let mut column = vec![0.0; updates.len()];
    (0..len)
        .map(|c| {
            column.iter_mut().zip(updates).for_each(|(v, u)| *v = u[c]);
            rule(&mut column)
        })
        .collect()
}
