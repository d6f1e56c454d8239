//! Two-cluster filtering for iid and mildly skewed data.

use log::debug;

use super::FeatureMatrix;
use crate::clustering::{angle, kmeans};
use crate::error::{Error, Result};

/// Mean over rows of each row's largest angle (degrees) to the rest of the
/// cluster. Lower means denser; a single row scores 0.
pub fn cluster_inverse_density(rows: &[&[f64]]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::contract("inverse density of an empty cluster"));
    }
    let n = rows.len();
    let mut max_angle = vec![0.0f64; n];
    for i in 0..n {
        for j in i + 1..n {
            let a = angle(rows[i], rows[j]);
            max_angle[i] = max_angle[i].max(a);
            max_angle[j] = max_angle[j].max(a);
        }
    }
    Ok(max_angle.iter().sum::<f64>() / n as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MildFilter {
    /// Row indices of the flagged cluster, ascending.
    pub bad: Vec<usize>,
    /// k-means label per row (0 or 1).
    pub labels: Vec<i64>,
    pub inverse_densities: [f64; 2],
    pub scores: [f64; 2],
}

/// Splits the rows with 2-means and flags the cluster whose size-weighted
/// inverse density is strictly lower. Equal scores flag the cluster that
/// contains row 0.
pub fn filter_mild(features: &FeatureMatrix, seed: u64) -> Result<MildFilter> {
    let rows = &features.rows;
    if rows.len() < 2 {
        return Err(Error::contract("filtering needs at least two peers"));
    }
    if rows.iter().all(|r| r == &rows[0]) {
        debug!("all feature rows identical; nothing to separate");
        return Ok(MildFilter {
            bad: Vec::new(),
            labels: vec![0; rows.len()],
            inverse_densities: [0.0; 2],
            scores: [0.0; 2],
        });
    }
    let km = kmeans(rows, 2, seed)?;
    let total = rows.len() as f64;
    let mut dns = [0.0; 2];
    let mut scores = [0.0; 2];
    for (j, members) in km.assignment.members.iter().enumerate() {
        let cluster: Vec<&[f64]> = members.iter().map(|&i| rows[i].as_slice()).collect();
        dns[j] = cluster_inverse_density(&cluster)?;
        scores[j] = members.len() as f64 / total * dns[j];
    }
    let bad_cluster = if scores[0] < scores[1] {
        0
    } else if scores[1] < scores[0] {
        1
    } else {
        km.assignment.labels[0] as usize
    };
    Ok(MildFilter {
        bad: km.assignment.members[bad_cluster].clone(),
        labels: km.assignment.labels,
        inverse_densities: dns,
        scores,
    })
}
