//! Splitting a training set among peers: iid, Dirichlet-skewed ("mild") and
//! single-class ("extreme").

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

const DIRICHLET_ATTEMPTS: u64 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Iid,
    Mild,
    Extreme,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionPlan {
    pub regime: Regime,
    /// Example indices held by each peer.
    pub assignments: Vec<Vec<usize>>,
    /// Per-peer class histogram.
    pub inventory: Vec<Vec<usize>>,
    /// Dirichlet proportions per class over peers (mild regime only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_proportions: Vec<Vec<f64>>,
}

impl PartitionPlan {
    fn build(regime: Regime, ds: &Dataset, assignments: Vec<Vec<usize>>) -> Self {
        let inventory = assignments
            .iter()
            .map(|idx| {
                let mut h = vec![0; ds.classes()];
                idx.iter().for_each(|&i| h[ds.labels()[i]] += 1);
                h
            })
            .collect();
        PartitionPlan { regime, assignments, inventory, class_proportions: Vec::new() }
    }

    pub fn peers(&self) -> usize {
        self.assignments.len()
    }

    /// Peers holding at least one example of `class`.
    pub fn holders(&self, class: usize) -> Vec<usize> {
        (0..self.peers()).filter(|&p| self.inventory[p].get(class).copied().unwrap_or(0) > 0).collect()
    }

    pub fn peer_dataset(&self, ds: &Dataset, peer: usize) -> Dataset {
        ds.subset(&self.assignments[peer])
    }
}

fn check_peers(ds: &Dataset, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::config("peer count must be positive"));
    }
    if ds.len() < k {
        return Err(Error::config(format!("{} examples cannot cover {k} peers", ds.len())));
    }
    Ok(())
}

/// Shuffles all indices and deals them round-robin.
pub fn partition_iid(ds: &Dataset, k: usize, seed: u64) -> Result<PartitionPlan> {
    check_peers(ds, k)?;
    let mut rng = rng::stream(seed, Stream::Partition, 0, 0);
    let mut order: Vec<usize> = (0..ds.len()).collect();
    order.shuffle(&mut rng);
    let mut assignments = vec![Vec::new(); k];
    for (pos, idx) in order.into_iter().enumerate() {
        assignments[pos % k].push(idx);
    }
    Ok(PartitionPlan::build(Regime::Iid, ds, assignments))
}

fn class_indices(ds: &Dataset) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); ds.classes()];
    for (i, &l) in ds.labels().iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Per-class Dirichlet split over peers.
///
/// For each class, a proportion vector over the `k` peers is drawn and the
/// shuffled class examples are cut at `floor(cumsum * n_class)`. If some peer
/// ends up with no example at all, the whole plan is redrawn from the next
/// sub-stream.
pub fn partition_dirichlet(ds: &Dataset, k: usize, alpha: f64, seed: u64) -> Result<PartitionPlan> {
    check_peers(ds, k)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::config(format!("Dirichlet alpha must be positive, got {alpha}")));
    }
    let by_class = class_indices(ds);
    for attempt in 0..DIRICHLET_ATTEMPTS {
        let mut rng = rng::stream(seed, Stream::Partition, 1, attempt);
        let mut assignments = vec![Vec::new(); k];
        let mut proportions = Vec::with_capacity(by_class.len());
        for members in &by_class {
            let mut members = members.clone();
            members.shuffle(&mut rng);
            let p = rng::dirichlet(&mut rng, alpha, k);
            let n_c = members.len();
            let mut start = 0;
            let mut cum = 0.0;
            for (peer, &share) in p.iter().enumerate() {
                cum += share;
                let end = if peer + 1 == k { n_c } else { ((cum * n_c as f64).floor() as usize).clamp(start, n_c) };
                assignments[peer].extend_from_slice(&members[start..end]);
                start = end;
            }
            proportions.push(p);
        }
        if assignments.iter().all(|a| !a.is_empty()) {
            let mut plan = PartitionPlan::build(Regime::Mild, ds, assignments);
            plan.class_proportions = proportions;
            return Ok(plan);
        }
    }
    Err(Error::config(format!(
        "could not draw a Dirichlet(alpha={alpha}) plan giving every one of {k} peers an example"
    )))
}

/// Every peer receives examples of exactly one class, `k / classes` peers per class.
pub fn partition_extreme(ds: &Dataset, k: usize, seed: u64) -> Result<PartitionPlan> {
    check_peers(ds, k)?;
    let classes = ds.classes();
    if k < classes || k % classes != 0 {
        return Err(Error::config(format!(
            "extreme partition needs a peer count divisible by the {classes} classes, got {k}"
        )));
    }
    let per_class = k / classes;
    let by_class = class_indices(ds);
    if let Some(c) = by_class.iter().position(|m| m.len() < per_class) {
        return Err(Error::config(format!("class {c} has fewer examples than its {per_class} peers")));
    }
    let mut rng = rng::stream(seed, Stream::Partition, 2, 0);
    let mut peers: Vec<usize> = (0..k).collect();
    peers.shuffle(&mut rng);
    let mut assignments = vec![Vec::new(); k];
    for (c, members) in by_class.iter().enumerate() {
        let mut owners = peers[c * per_class..(c + 1) * per_class].to_vec();
        owners.sort_unstable();
        let mut members = members.clone();
        members.shuffle(&mut rng);
        for (pos, idx) in members.into_iter().enumerate() {
            assignments[owners[pos % per_class]].push(idx);
        }
    }
    Ok(PartitionPlan::build(Regime::Extreme, ds, assignments))
}
