//! Label flipping: attackers relabel every source-class example as the
//! target class and otherwise train honestly.

use std::collections::BTreeSet;

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, PartitionPlan, Regime};
use crate::error::{Error, Result};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttackSpec {
    pub source: usize,
    pub target: usize,
    pub attackers: BTreeSet<usize>,
}

impl AttackSpec {
    pub fn new(source: usize, target: usize, attackers: BTreeSet<usize>) -> Result<Self> {
        if source == target {
            return Err(Error::config("source and target classes must differ"));
        }
        Ok(AttackSpec { source, target, attackers })
    }

    /// Checks class ranges and that every attacker owns a source example.
    pub fn validate(&self, plan: &PartitionPlan, classes: usize) -> Result<()> {
        if self.source >= classes || self.target >= classes {
            return Err(Error::config(format!(
                "source {} / target {} outside the {classes} classes",
                self.source, self.target
            )));
        }
        for &a in &self.attackers {
            if a >= plan.peers() {
                return Err(Error::config(format!("attacker id {a} is not a peer")));
            }
            if plan.inventory[a][self.source] == 0 {
                return Err(Error::config(format!("attacker {a} holds no source-class example")));
            }
        }
        Ok(())
    }

    pub fn is_attacker(&self, peer: usize) -> bool {
        self.attackers.contains(&peer)
    }
}

/// Relabels source-class examples as the target class; features are untouched.
pub fn flip_labels(ds: &Dataset, spec: &AttackSpec) -> Dataset {
    let labels = ds
        .labels()
        .iter()
        .map(|&l| if l == spec.source { spec.target } else { l })
        .collect();
    ds.with_labels(labels)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AttackerSelection {
    pub attackers: BTreeSet<usize>,
    /// Threat-model bound violations; the run proceeds regardless.
    pub warnings: Vec<String>,
}

/// Draws `round(ratio * eligible)` attackers uniformly from peers holding at
/// least one source example.
///
/// A warning is emitted when the coalition reaches half of the source-class
/// holders (iid / mild) or the number of target-class holders (extreme).
pub fn select_attackers(
    plan: &PartitionPlan,
    ratio: f64,
    source: usize,
    target: usize,
    seed: u64,
) -> Result<AttackerSelection> {
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::config(format!("attacker ratio must lie in [0, 1], got {ratio}")));
    }
    if source == target {
        return Err(Error::config("source and target classes must differ"));
    }
    let mut eligible = plan.holders(source);
    if ratio > 0.0 && eligible.is_empty() {
        return Err(Error::config(format!("no peer holds source class {source}")));
    }
    let count = (ratio * eligible.len() as f64).round() as usize;
    let mut rng = rng::stream(seed, Stream::Attackers, 0, 0);
    eligible.shuffle(&mut rng);
    let attackers: BTreeSet<usize> = eligible.iter().take(count).copied().collect();

    let mut warnings = Vec::new();
    if count > 0 {
        match plan.regime {
            Regime::Iid | Regime::Mild => {
                if 2 * count >= eligible.len() {
                    warnings.push(format!(
                        "{count} attackers reach half of the {} source-class holders",
                        eligible.len()
                    ));
                }
            }
            Regime::Extreme => {
                let target_holders = plan.holders(target).len();
                if count >= target_holders {
                    warnings.push(format!(
                        "{count} attackers are not fewer than the {target_holders} target-class holders"
                    ));
                }
            }
        }
    }
    for w in &warnings {
        warn!("threat-model bound: {w}");
    }
    Ok(AttackerSelection { attackers, warnings })
}
