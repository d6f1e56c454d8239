//! Numerical primitives used by the defense and its diagnostics.

mod hdbscan;
mod kmeans;
mod pca;

pub use hdbscan::{hdbscan, mutual_reachability_mst, HDBSCAN_MIN_SAMPLES};
pub use kmeans::{kmeans, KMeans};
pub use pca::{pca_top2, Pca2};

use serde::Serialize;

use crate::error::{Error, Result};

/// Label used for points that belong to no cluster.
pub const OUTLIER: i64 = -1;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClusterAssignment {
    /// Cluster id per row, or [`OUTLIER`].
    pub labels: Vec<i64>,
    /// Row indices of each cluster, ascending.
    pub members: Vec<Vec<usize>>,
}

impl ClusterAssignment {
    /// Builds member lists from labels in `[0, n_clusters)` or [`OUTLIER`].
    pub fn from_labels(labels: Vec<i64>, n_clusters: usize) -> Result<Self> {
        let mut members = vec![Vec::new(); n_clusters];
        for (row, &l) in labels.iter().enumerate() {
            match l {
                OUTLIER => {}
                l if l >= 0 && (l as usize) < n_clusters => members[l as usize].push(row),
                l => return Err(Error::contract(format!("cluster label {l} out of range"))),
            }
        }
        Ok(ClusterAssignment { labels, members })
    }

    pub fn n_clusters(&self) -> usize {
        self.members.len()
    }

    pub fn outliers(&self) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == OUTLIER).collect()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Angle between two vectors in degrees, in `[0, 180]`.
///
/// A zero-norm operand yields 0.
pub fn angle(u: &[f64], v: &[f64]) -> f64 {
    let (nu, nv) = (norm(u), norm(v));
    if nu == 0.0 || nv == 0.0 {
        return 0.0;
    }
    // 2 atan2(|u' - v'|, |u' + v'|) on unit vectors stays accurate near 0 and 180.
    let (mut diff, mut sum) = (0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (a / nu, b / nv);
        diff += (a - b) * (a - b);
        sum += (a + b) * (a + b);
    }
    (2.0 * diff.sqrt().atan2(sum.sqrt())).to_degrees()
}

pub(crate) fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let dim = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(Error::Shape { what: "feature row", expected: dim, found: bad.len() });
    }
    Ok(dim)
}
