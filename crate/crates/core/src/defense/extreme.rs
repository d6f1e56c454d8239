//! Density clustering for single-class (extreme non-iid) peers.

use super::{build_features_extreme, neuron_magnitudes, FeatureMatrix, OutputLayerGradients};
use crate::clustering::{hdbscan, norm, OUTLIER};
use crate::error::{Error, Result};
use crate::nn::argmax;

pub const MIN_CLUSTER_SIZE: usize = 2;

#[derive(Clone, Debug, PartialEq)]
pub struct ExtremeFilter {
    /// Row indices flagged as bad, ascending.
    pub bad: Vec<usize>,
    /// HDBSCAN label per row (`-1` for outliers).
    pub labels: Vec<i64>,
    /// Strongest neuron of each cluster's mean output-layer gradient.
    pub cluster_top_neuron: Vec<usize>,
    pub features: FeatureMatrix,
}

/// Clusters each peer's own strongest-neuron features with HDBSCAN and flags:
/// every outlier, and for each pair of clusters whose mean gradients peak at
/// the same neuron, the strictly smaller cluster.
pub fn filter_extreme(olg: &OutputLayerGradients) -> Result<ExtremeFilter> {
    if olg.peers() < 3 {
        return Err(Error::contract("extreme filtering needs at least three peers"));
    }
    let mag = neuron_magnitudes(olg);
    let features = build_features_extreme(olg, &mag);
    let assignment = hdbscan(&features.rows, MIN_CLUSTER_SIZE)?;

    let block = olg.hidden() + 1;
    let cluster_top_neuron: Vec<usize> = assignment
        .members
        .iter()
        .map(|members| {
            let mut mean = vec![0.0; olg.peer_row(0).len()];
            for &k in members {
                mean.iter_mut().zip(olg.peer_row(k)).for_each(|(m, v)| *m += v);
            }
            mean.iter_mut().for_each(|m| *m /= members.len() as f64);
            let mags: Vec<f64> = mean.chunks_exact(block).map(norm).collect();
            argmax(&mags)
        })
        .collect();

    let z = assignment.n_clusters();
    let mut flagged = vec![false; z];
    for i in 0..z {
        for j in i + 1..z {
            if cluster_top_neuron[i] != cluster_top_neuron[j] {
                continue;
            }
            let (si, sj) = (assignment.members[i].len(), assignment.members[j].len());
            if si > sj {
                flagged[j] = true;
            } else if sj > si {
                flagged[i] = true;
            }
        }
    }
    let bad = (0..olg.peers())
        .filter(|&k| {
            let l = assignment.labels[k];
            l == OUTLIER || flagged[l as usize]
        })
        .collect();
    Ok(ExtremeFilter { bad, labels: assignment.labels, cluster_top_neuron, features })
}
