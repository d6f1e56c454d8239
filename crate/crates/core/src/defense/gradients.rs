//! Output-layer gradient extraction and per-neuron magnitudes.

use serde::{Deserialize, Serialize};

use crate::clustering::norm;
use crate::error::{Error, Result};
use crate::federation::UpdateGradient;

/// Output-layer gradients of each peer, stored neuron by neuron as
/// `(weight row | bias)` blocks of length `hidden + 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct OutputLayerGradients {
    hidden: usize,
    classes: usize,
    peers: Vec<Vec<f64>>,
}

impl OutputLayerGradients {
    pub fn from_updates(gradients: &[UpdateGradient]) -> Result<Self> {
        let first = gradients.first().ok_or_else(|| Error::contract("no gradients supplied"))?;
        let dims = first.params().dims();
        let mut peers = Vec::with_capacity(gradients.len());
        for g in gradients {
            let p = g.params();
            if p.dims() != dims {
                return Err(Error::Shape {
                    what: "peer gradient",
                    expected: dims.param_count(),
                    found: p.dims().param_count(),
                });
            }
            let mut row = Vec::with_capacity(dims.classes * dims.neuron_len());
            for i in 0..dims.classes {
                let (w, b) = p.output_neuron(i);
                row.extend_from_slice(w);
                row.push(b);
            }
            peers.push(row);
        }
        Ok(OutputLayerGradients { hidden: dims.hidden, classes: dims.classes, peers })
    }

    /// Builds from explicit per-peer blocks, each `classes * (hidden + 1)` long.
    pub fn from_rows(hidden: usize, classes: usize, peers: Vec<Vec<f64>>) -> Result<Self> {
        let len = classes * (hidden + 1);
        if let Some(bad) = peers.iter().find(|r| r.len() != len) {
            return Err(Error::Shape { what: "output-layer row", expected: len, found: bad.len() });
        }
        if classes < 2 {
            return Err(Error::contract("at least two output neurons are required"));
        }
        Ok(OutputLayerGradients { hidden, classes, peers })
    }

    pub fn peers(&self) -> usize {
        self.peers.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    /// Weights followed by bias of neuron `class` for one peer.
    pub fn neuron(&self, peer: usize, class: usize) -> &[f64] {
        let len = self.hidden + 1;
        &self.peers[peer][class * len..(class + 1) * len]
    }

    pub fn bias(&self, peer: usize, class: usize) -> f64 {
        self.neuron(peer, class)[self.hidden]
    }

    /// The peer's whole output layer, neuron blocks concatenated.
    pub fn peer_row(&self, peer: usize) -> &[f64] {
        &self.peers[peer]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NeuronMagnitudes {
    pub per_peer: Vec<Vec<f64>>,
    /// Sum over peers of each neuron's magnitude.
    pub aggregated: Vec<f64>,
    /// Each peer's two largest neurons, largest first.
    pub peer_top2: Vec<(usize, usize)>,
}

/// Indices of the two largest values, largest first; ties go to the lower index.
pub fn top2(values: &[f64]) -> (usize, usize) {
    assert!(values.len() >= 2, "top2 needs at least two values");
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    (order[0], order[1])
}

/// Euclidean norm of every neuron block, per peer and summed over peers.
pub fn neuron_magnitudes(olg: &OutputLayerGradients) -> NeuronMagnitudes {
    let per_peer: Vec<Vec<f64>> = (0..olg.peers())
        .map(|k| (0..olg.classes).map(|i| norm(olg.neuron(k, i))).collect())
        .collect();
    let mut aggregated = vec![0.0; olg.classes];
    for m in &per_peer {
        aggregated.iter_mut().zip(m).for_each(|(a, v)| *a += v);
    }
    let peer_top2 = per_peer.iter().map(|m| top2(m)).collect();
    NeuronMagnitudes { per_peer, aggregated, peer_top2 }
}

/// Neurons with the two largest aggregated magnitudes: the presumed source
/// and target classes.
pub fn identify_source_target(mag: &NeuronMagnitudes) -> (usize, usize) {
    top2(&mag.aggregated)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistributionMode {
    Mild,
    Extreme,
}

/// Infers the data regime from bias-gradient signs.
///
/// A peer's output error is negative exactly for the classes it holds, so the
/// number of negative bias gradients counts its classes. If the median count
/// is at most `extreme_threshold` the round is treated as extreme non-iid.
pub fn detect_distribution_mode(olg: &OutputLayerGradients, extreme_threshold: usize) -> DistributionMode {
    let mut held: Vec<usize> = (0..olg.peers())
        .map(|k| (0..olg.classes).filter(|&i| olg.bias(k, i) < 0.0).count())
        .collect();
    if held.is_empty() {
        return DistributionMode::Mild;
    }
    held.sort_unstable();
    let mid = held.len() / 2;
    let median = if held.len() % 2 == 1 { held[mid] as f64 } else { (held[mid - 1] + held[mid]) as f64 / 2.0 };
    if median <= extreme_threshold as f64 {
        DistributionMode::Extreme
    } else {
        DistributionMode::Mild
    }
}

/// Per-peer feature rows and the neuron pair each row was built from.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub rows: Vec<Vec<f64>>,
    pub neurons: Vec<(usize, usize)>,
}

fn pair_row(olg: &OutputLayerGradients, peer: usize, (a, b): (usize, usize)) -> Vec<f64> {
    let mut row = Vec::with_capacity(2 * (olg.hidden + 1));
    row.extend_from_slice(olg.neuron(peer, a));
    row.extend_from_slice(olg.neuron(peer, b));
    row
}

/// Rows of the globally selected neuron pair, same order for every peer.
pub fn build_features_mild(olg: &OutputLayerGradients, first: usize, second: usize) -> Result<FeatureMatrix> {
    if first >= olg.classes || second >= olg.classes {
        return Err(Error::contract("neuron index out of range"));
    }
    Ok(FeatureMatrix {
        rows: (0..olg.peers()).map(|k| pair_row(olg, k, (first, second))).collect(),
        neurons: vec![(first, second); olg.peers()],
    })
}

/// Rows of each peer's own two strongest neurons, strongest first.
pub fn build_features_extreme(olg: &OutputLayerGradients, mag: &NeuronMagnitudes) -> FeatureMatrix {
    FeatureMatrix {
        rows: (0..olg.peers()).map(|k| pair_row(olg, k, mag.peer_top2[k])).collect(),
        neurons: mag.peer_top2.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn olg(hidden: usize, classes: usize, rows: Vec<Vec<f64>>) -> OutputLayerGradients {
        OutputLayerGradients::from_rows(hidden, classes, rows).unwrap()
    }

    #[test]
    fn zero_gradients_tie_break_low() {
        let g = olg(2, 3, vec![vec![0.0; 9]]);
        let m = neuron_magnitudes(&g);
        assert_eq!(m.per_peer[0], vec![0.0; 3]);
        assert_eq!(m.peer_top2[0], (0, 1));
        assert_eq!(identify_source_target(&m), (0, 1));
    }

    #[test]
    fn three_four_five() {
        let g = olg(2, 2, vec![vec![3.0, 4.0, 0.0, 0.0, 0.0, 0.0]]);
        assert_eq!(neuron_magnitudes(&g).per_peer[0][0], 5.0);
    }

    #[test]
    fn magnitudes_sum_over_peers() {
        let g = olg(0, 2, vec![vec![1.0, 0.0], vec![0.0, -2.0]]);
        let m = neuron_magnitudes(&g);
        assert_eq!(m.aggregated, vec![1.0, 2.0]);
        assert_eq!(identify_source_target(&m).0, 1);
    }

    #[test]
    fn top2_rules() {
        assert_eq!(top2(&[5.0, 5.0, 1.0]), (0, 1));
        assert_eq!(top2(&[1.0, 2.0, 3.0]), (2, 1));
        let mut peaks = vec![0.1; 10];
        peaks[7] = 3.0;
        peaks[1] = 2.0;
        assert_eq!(top2(&peaks), (7, 1));
    }

    fn with_biases(biases: &[&[f64]]) -> OutputLayerGradients {
        let rows = biases.iter().map(|b| b.to_vec()).collect();
        olg(0, biases[0].len(), rows)
    }

    #[test]
    fn mode_detection() {
        let one_neg = with_biases(&[&[-0.5, 0.2, 0.3], &[0.1, -0.9, 0.8], &[0.4, 0.4, -0.8]]);
        assert_eq!(detect_distribution_mode(&one_neg, 1), DistributionMode::Extreme);
        let all_neg = with_biases(&[&[-0.5, -0.2, -0.3], &[-0.1, -0.9, -0.8]]);
        assert_eq!(detect_distribution_mode(&all_neg, 1), DistributionMode::Mild);
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for _ in 0..3 {
            let mut b = vec![0.1; 10];
            b[0] = -0.9;
            rows.push(b);
        }
        let mut b = vec![-0.1; 10];
        b[8] = 0.9;
        b[9] = 0.9;
        rows.push(b);
        assert_eq!(detect_distribution_mode(&olg(0, 10, rows), 1), DistributionMode::Extreme);
    }

    #[test]
    fn mild_features_layout() {
        let hidden = 4;
        let row: Vec<f64> = (0..3 * (hidden + 1)).map(|v| v as f64).collect();
        let g = olg(hidden, 3, vec![row.clone(), row]);
        let f = build_features_mild(&g, 2, 0).unwrap();
        assert_eq!(f.rows[0].len(), 10);
        assert_eq!(&f.rows[0][..5], &[10.0, 11.0, 12.0, 13.0, 14.0]);
        assert_eq!(&f.rows[0][5..], &[0.0, 1.0, 2.0, 3.0, 4.0]);
        let swapped = build_features_mild(&g, 0, 2).unwrap();
        assert_eq!(&swapped.rows[1][..5], &f.rows[1][5..]);
        let zeros = olg(hidden, 3, vec![vec![0.0; 15]]);
        assert!(build_features_mild(&zeros, 0, 1).unwrap().rows[0].iter().all(|&v| v == 0.0));
    }
}
