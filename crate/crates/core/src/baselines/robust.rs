use super::coordinatewise;
use crate::error::{Error, Result};

/// Median of the values (mean of the two middle ones for even counts).
/// Reorders `values`.
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of no values");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Drops `floor(beta * m)` values from each end and averages the rest.
pub fn trimmed_mean_of(values: &mut [f64], beta: f64) -> Result<f64> {
    let m = values.len();
    if !(0.0..0.5).contains(&beta) {
        return Err(Error::config(format!("trim fraction must lie in [0, 0.5), got {beta}")));
    }
    let cut = (beta * m as f64).floor() as usize;
    if m <= 2 * cut {
        return Err(Error::config(format!("trimming {cut} per side leaves nothing of {m} values")));
    }
    values.sort_by(f64::total_cmp);
    let kept = &values[cut..m - cut];
    Ok(kept.iter().sum::<f64>() / kept.len() as f64)
}

/// Siegel's repeated-median line through `(rank, value)` points, evaluated
/// at the middle rank.
///
/// Values are sorted and given abscissae `1..=m`; the slope is the median
/// over points of the median pairwise slope, the intercept the median
/// residual.
pub fn repeated_median_of(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "repeated median of no values");
    let mut ys = values.to_vec();
    ys.sort_by(f64::total_cmp);
    let m = ys.len();
    if m == 1 {
        return ys[0];
    }
    let mut inner = Vec::with_capacity(m - 1);
    let mut slopes: Vec<f64> = (0..m)
        .map(|i| {
            inner.clear();
            inner.extend((0..m).filter(|&k| k != i).map(|k| (ys[k] - ys[i]) / (k as f64 - i as f64)));
            median(&mut inner)
        })
        .collect();
    let slope = median(&mut slopes);
    let mut residuals: Vec<f64> = ys.iter().enumerate().map(|(i, y)| y - slope * (i + 1) as f64).collect();
    let intercept = median(&mut residuals);
    intercept + slope * (m + 1) as f64 / 2.0
}

pub fn coord_median(updates: &[&[f64]]) -> Result<Vec<f64>> {
    coordinatewise(updates, |col| Ok(median(col)))
}

pub fn trimmed_mean(updates: &[&[f64]], beta: f64) -> Result<Vec<f64>> {
    coordinatewise(updates, |col| trimmed_mean_of(col, beta))
}

pub fn repeated_median(updates: &[&[f64]]) -> Result<Vec<f64>> {
    coordinatewise(updates, |col| Ok(repeated_median_of(col)))
}
