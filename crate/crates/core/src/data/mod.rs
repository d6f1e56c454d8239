//! Datasets, partition regimes and the label-flipping injector.

mod attack;
mod idx;
mod partition;

pub use attack::{flip_labels, select_attackers, AttackSpec, AttackerSelection};
pub use idx::{load_idx, parse_idx_images, parse_idx_labels};
pub use partition::{partition_dirichlet, partition_extreme, partition_iid, PartitionPlan, Regime};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};

/// Labelled examples stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<f64>,
    labels: Vec<usize>,
    dim: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f64>, labels: Vec<usize>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::contract("feature dimension must be positive"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::Shape {
                what: "feature matrix",
                expected: labels.len() * dim,
                found: features.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::contract(format!("label {bad} is not below class count {classes}")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("features must be finite"));
        }
        Ok(Dataset { features, labels, dim, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn examples(&self) -> impl Iterator<Item = (&[f64], usize)> + '_ {
        self.features.chunks_exact(self.dim).zip(self.labels.iter().copied())
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        self.labels.iter().for_each(|&l| counts[l] += 1);
        counts
    }

    /// Copies the listed examples, in the listed order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.row(i));
        }
        Dataset {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    pub(crate) fn with_labels(&self, labels: Vec<usize>) -> Dataset {
        debug_assert_eq!(labels.len(), self.labels.len());
        Dataset { labels, ..self.clone() }
    }
}

/// Gaussian blobs, one per class, with means drawn uniformly from `[-4, 4]^dim`.
///
/// Example `i` belongs to class `i % classes`, so class sizes differ by at
/// most one.
pub fn synth_gaussian(classes: usize, n: usize, dim: usize, spread: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || n == 0 || dim == 0 {
        return Err(Error::config("synthetic data needs classes >= 2, n >= 1 and dim >= 1"));
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::config("synthetic spread must be finite and non-negative"));
    }
    let mut rng = rng::stream(seed, Stream::Synth, 0, 0);
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|_| (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect())
        .collect();
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        labels.push(c);
        for &m in &means[c] {
            features.push(m + spread * rng::standard_normal(&mut rng));
        }
    }
    Dataset::new(features, labels, dim, classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_balances_classes() {
        let ds = synth_gaussian(10, 1000, 3, 0.5, 1).unwrap();
        assert_eq!(ds.len(), 1000);
        assert_eq!(ds.class_counts(), vec![100; 10]);
    }

    #[test]
    fn synth_is_deterministic() {
        assert_eq!(synth_gaussian(4, 50, 2, 1.0, 9).unwrap(), synth_gaussian(4, 50, 2, 1.0, 9).unwrap());
        assert_ne!(synth_gaussian(4, 50, 2, 1.0, 9).unwrap(), synth_gaussian(4, 50, 2, 1.0, 10).unwrap());
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![0.0; 4], vec![0, 2], 2, 2).is_err());
        assert!(Dataset::new(vec![0.0; 3], vec![0, 1], 2, 2).is_err());
        assert!(Dataset::new(vec![f64::NAN, 0.0], vec![0], 2, 2).is_err());
        let ds = Dataset::new(vec![1.0, 2.0, 3.0, 4.0], vec![0, 1], 2, 2).unwrap();
        assert_eq!(ds.subset(&[1]).row(0), &[3.0, 4.0]);
    }
}
