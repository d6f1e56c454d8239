//! Server-side aggregation: plain averaging, the comparison rules, and the
//! label-flipping defense.

use crate::baselines::{coord_median, multi_krum_select, repeated_median, trimmed_mean, FoolsGold};
use crate::defense::{detect_bad_updates, DefenseOutcome, OutputLayerGradients};
use crate::error::{Error, Result};
use crate::nn::ModelParams;
use crate::rng::{derive_seed, Stream};

use super::config::{DefenseConfig, DefenseKind};
use super::training::{fedavg, UpdateGradient};

/// One round's peer contributions, ordered by ascending peer id.
#[derive(Clone, Copy, Debug)]
pub struct RoundInput<'a> {
    pub round: usize,
    pub peers: &'a [usize],
    pub models: &'a [ModelParams],
    pub gradients: &'a [UpdateGradient],
    pub sample_counts: &'a [usize],
    /// Number of attackers among `peers`; the default corruption level
    /// granted to trimmed mean and multi-Krum.
    pub attackers_present: usize,
}

#[derive(Clone, Debug)]
pub struct AggregateOutcome {
    /// The new global model; `None` keeps the previous one.
    pub model: Option<ModelParams>,
    /// Peers excluded or given zero weight, ascending.
    pub excluded: Vec<usize>,
    /// Diagnostics of the label-flipping defense when it ran.
    pub defense: Option<DefenseOutcome>,
}

/// Stateful aggregation rule (FoolsGold keeps per-peer histories).
#[derive(Clone, Debug)]
pub struct Aggregator {
    config: DefenseConfig,
    seed: u64,
    foolsgold: FoolsGold,
}

impl Aggregator {
    pub fn new(config: DefenseConfig, seed: u64) -> Self {
        Aggregator { config, seed, foolsgold: FoolsGold::new() }
    }

    pub fn kind(&self) -> DefenseKind {
        self.config.name
    }

    /// Corruption count granted to trimmed mean and multi-Krum for `m` peers.
    pub fn assumed_corrupt(&self, m: usize, attackers_present: usize) -> usize {
        match self.config.assumed_fraction {
            Some(f) => (f * m as f64).round() as usize,
            None => attackers_present,
        }
    }

    pub fn aggregate(&mut self, input: &RoundInput<'_>) -> Result<AggregateOutcome> {
        let m = input.peers.len();
        if m == 0 || input.models.len() != m || input.gradients.len() != m || input.sample_counts.len() != m {
            return Err(Error::contract("round input lists must be non-empty and of equal length"));
        }
        let dims = input.models[0].dims();
        let flat: Vec<&[f64]> = input.models.iter().map(|w| w.as_slice()).collect();
        let counts: Vec<f64> = input.sample_counts.iter().map(|&n| n as f64).collect();
        let rebuild = |v: Vec<f64>| ModelParams::from_vec(dims, v);
        let keep_all = |model| Ok(AggregateOutcome { model: Some(model), excluded: Vec::new(), defense: None });

        match self.config.name {
            DefenseKind::FedAvg => keep_all(fedavg(&input.models.iter().collect::<Vec<_>>(), &counts)?),
            DefenseKind::Median => keep_all(rebuild(coord_median(&flat)?)?),
            DefenseKind::RMedian => keep_all(rebuild(repeated_median(&flat)?)?),
            DefenseKind::TMean => {
                let beta = self.assumed_corrupt(m, input.attackers_present) as f64 / m as f64;
                let agg = if beta < 0.5 { trimmed_mean(&flat, beta)? } else { coord_median(&flat)? };
                keep_all(rebuild(agg)?)
            }
            DefenseKind::MKrum => {
                let f = self.assumed_corrupt(m, input.attackers_present);
                let keep = multi_krum_select(&flat, f)?;
                let chosen: Vec<&ModelParams> = keep.iter().map(|&i| &input.models[i]).collect();
                let model = fedavg(&chosen, &vec![1.0; chosen.len()])?;
                let excluded = (0..m).filter(|i| !keep.contains(i)).map(|i| input.peers[i]).collect();
                Ok(AggregateOutcome { model: Some(model), excluded, defense: None })
            }
            DefenseKind::FGold => {
                let out: Vec<&[f64]> = input.gradients.iter().map(|g| g.params().output_layer()).collect();
                let weights = self.foolsgold.update(input.peers, &out)?;
                let excluded: Vec<usize> =
                    weights.iter().zip(input.peers).filter(|(w, _)| **w == 0.0).map(|(_, &p)| p).collect();
                let model = if excluded.len() == m {
                    None
                } else {
                    Some(fedavg(&input.models.iter().collect::<Vec<_>>(), &weights)?)
                };
                Ok(AggregateOutcome { model, excluded, defense: None })
            }
            DefenseKind::Ours => {
                let olg = OutputLayerGradients::from_updates(input.gradients)?;
                let seed = derive_seed(self.seed, Stream::Defense, input.round as u64, 0);
                let outcome = detect_bad_updates(&olg, self.config.mode, self.config.extreme_threshold, seed)?;
                let (kept, weights): (Vec<&ModelParams>, Vec<f64>) = (0..m)
                    .filter(|i| !outcome.bad.contains(i))
                    .map(|i| (&input.models[i], counts[i]))
                    .unzip();
                let model = if kept.is_empty() { None } else { Some(fedavg(&kept, &weights)?) };
                let excluded = outcome.bad.iter().map(|&i| input.peers[i]).collect();
                Ok(AggregateOutcome { model, excluded, defense: Some(outcome) })
            }
        }
    }
}
