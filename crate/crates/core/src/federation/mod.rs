//! Federated training rounds: peer selection, local training, aggregation
//! and evaluation.
//!
//! Every random draw comes from a stream keyed on the experiment seed and the
//! draw's role (see [`crate::rng`]), so a run is reproducible regardless of
//! the number of worker threads.

mod aggregator;
mod config;
mod training;

pub use aggregator::{AggregateOutcome, Aggregator, RoundInput};
pub use config::{
    AttackConfig, DatasetConfig, DefenseConfig, DefenseKind, ExperimentConfig, PartitionConfig, TrainingConfig,
};
pub use training::{compute_update_gradient, fedavg, local_train, UpdateGradient};

use std::collections::BTreeSet;
use std::time::Instant;

use rand::seq::index;
use rayon::prelude::*;

use crate::clustering::pca_top2;
use crate::data::{
    flip_labels, load_idx, partition_dirichlet, partition_extreme, partition_iid, select_attackers, synth_gaussian,
    AttackSpec, Dataset, PartitionPlan, Regime,
};
use crate::defense::{build_features_mild, identify_source_target, neuron_magnitudes, OutputLayerGradients};
use crate::error::{Error, Result};
use crate::metrics::{detection_scores, evaluate, RoundReport};
use crate::nn::{Dims, ModelParams};
use crate::rng::{self, Stream};

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentData {
    pub train: Dataset,
    pub test: Dataset,
}

/// Loads the configured train and test sets.
///
/// A synthetic dataset draws `train_size + test_size` examples from one set of
/// blobs and splits them in order.
pub fn load_data(config: &ExperimentConfig) -> Result<ExperimentData> {
    match &config.dataset {
        DatasetConfig::Idx { train_images, train_labels, test_images, test_labels, classes } => {
            let train = load_idx(train_images, train_labels, *classes)?;
            let test = load_idx(test_images, test_labels, *classes)?;
            if train.dim() != test.dim() {
                return Err(Error::Shape { what: "test example", expected: train.dim(), found: test.dim() });
            }
            Ok(ExperimentData { train, test })
        }
        DatasetConfig::Synth { classes, train_size, test_size, dim, spread } => {
            let all = synth_gaussian(*classes, train_size + test_size, *dim, *spread, config.seed)?;
            let idx: Vec<usize> = (0..all.len()).collect();
            Ok(ExperimentData { train: all.subset(&idx[..*train_size]), test: all.subset(&idx[*train_size..]) })
        }
    }
}

/// Partition, attacker coalition and per-peer training sets of one run.
#[derive(Clone, Debug, PartialEq)]
pub struct Setup {
    pub dims: Dims,
    pub plan: PartitionPlan,
    pub attack: AttackSpec,
    /// Threat-model bound violations noticed while choosing attackers.
    pub warnings: Vec<String>,
    /// Local data of each peer, labels already flipped for attackers.
    pub peer_data: Vec<Dataset>,
}

pub fn partition(config: &ExperimentConfig, train: &Dataset) -> Result<PartitionPlan> {
    let p = &config.partition;
    match p.regime {
        Regime::Iid => partition_iid(train, p.peers, config.seed),
        Regime::Mild => partition_dirichlet(train, p.peers, p.alpha, config.seed),
        Regime::Extreme => partition_extreme(train, p.peers, config.seed),
    }
}

/// Validates the configuration against the data and builds the run setup.
pub fn prepare(config: &ExperimentConfig, data: &ExperimentData) -> Result<Setup> {
    config.validate()?;
    let classes = config.dataset.classes();
    let dims = Dims::new(data.train.dim(), config.training.hidden, classes)?;
    let plan = partition(config, &data.train)?;
    let a = &config.attack;
    let (attackers, warnings) = match &a.attackers {
        Some(ids) => {
            if let Some(bad) = ids.iter().find(|&&k| k >= plan.peers()) {
                return Err(Error::config(format!("attacker id {bad} exceeds the peer count")));
            }
            (ids.iter().copied().collect::<BTreeSet<_>>(), Vec::new())
        }
        None => {
            let sel = select_attackers(&plan, a.ratio, a.source, a.target, config.seed)?;
            (sel.attackers, sel.warnings)
        }
    };
    let attack = AttackSpec::new(a.source, a.target, attackers)?;
    attack.validate(&plan, classes)?;

    if config.defense.name == DefenseKind::MKrum {
        let m = config.training.selected_per_round(plan.peers());
        let f = match config.defense.assumed_fraction {
            Some(frac) => (frac * m as f64).round() as usize,
            None => attack.attackers.len().min(m),
        };
        if m < f + 3 {
            return Err(Error::config(format!(
                "multi-Krum needs at least f + 3 = {} peers per round, only {m} are selected",
                f + 3
            )));
        }
    }

    let peer_data = (0..plan.peers())
        .map(|k| {
            let local = plan.peer_dataset(&data.train, k);
            if attack.is_attacker(k) {
                flip_labels(&local, &attack)
            } else {
                local
            }
        })
        .collect();
    Ok(Setup { dims, plan, attack, warnings, peer_data })
}

/// Output-layer gradient features of one round, for plotting.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDump {
    pub round: usize,
    pub peers: Vec<usize>,
    pub attacker: Vec<bool>,
    pub flagged: Vec<bool>,
    /// Cluster label per row; empty when no clustering ran.
    pub labels: Vec<i64>,
    /// Output neurons the feature rows were taken from.
    pub neurons: Vec<(usize, usize)>,
    pub rows: Vec<Vec<f64>>,
    /// First two principal-component coordinates of `rows`.
    pub coords: Vec<[f64; 2]>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads for local training; 0 lets the pool decide.
    pub threads: usize,
    pub dump_features: bool,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutcome {
    pub setup: Setup,
    pub reports: Vec<RoundReport>,
    pub dumps: Vec<FeatureDump>,
    pub final_model: ModelParams,
}

/// Selected peers for round `t`, ascending.
pub fn select_peers(seed: u64, peers: usize, per_round: usize, round: usize) -> Vec<usize> {
    if per_round >= peers {
        return (0..peers).collect();
    }
    let mut rng = rng::stream(seed, Stream::Selection, round as u64, 0);
    let mut s = index::sample(&mut rng, peers, per_round).into_vec();
    s.sort_unstable();
    s
}

fn feature_dump(
    round: usize,
    input: &RoundInput<'_>,
    outcome: &AggregateOutcome,
    attack: &AttackSpec,
) -> Result<FeatureDump> {
    let (neurons, rows, labels) = match &outcome.defense {
        Some(d) => (d.features.neurons.clone(), d.features.rows.clone(), d.labels.clone()),
        None => {
            let olg = OutputLayerGradients::from_updates(input.gradients)?;
            let (first, second) = identify_source_target(&neuron_magnitudes(&olg));
            let f = build_features_mild(&olg, first, second)?;
            (f.neurons, f.rows, Vec::new())
        }
    };
    let coords = if rows.len() >= 2 {
        pca_top2(&rows)?.coords
    } else {
        vec![[0.0; 2]; rows.len()]
    };
    Ok(FeatureDump {
        round,
        peers: input.peers.to_vec(),
        attacker: input.peers.iter().map(|&p| attack.is_attacker(p)).collect(),
        flagged: input.peers.iter().map(|p| outcome.excluded.contains(p)).collect(),
        labels,
        neurons,
        rows,
        coords,
    })
}

/// Runs every round of one experiment.
pub fn run_experiment(config: &ExperimentConfig, data: &ExperimentData, opts: RunOptions) -> Result<ExperimentOutcome> {
    let setup = prepare(config, data)?;
    for w in &setup.warnings {
        log::warn!("{w}");
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker threads: {e}")))?;
    let hp = config.training.hyperparams();
    let per_round = config.training.selected_per_round(setup.plan.peers());
    let (source, target) = (config.attack.source, config.attack.target);
    let mut global = ModelParams::glorot(setup.dims, &mut rng::stream(config.seed, Stream::Init, 0, 0));
    let mut aggregator = Aggregator::new(config.defense.clone(), config.seed);
    let mut reports = Vec::with_capacity(config.training.rounds);
    let mut dumps = Vec::new();

    for round in 1..=config.training.rounds {
        let peers: Vec<usize> = select_peers(config.seed, setup.plan.peers(), per_round, round)
            .into_iter()
            .filter(|&k| {
                let empty = setup.peer_data[k].is_empty();
                if empty {
                    log::warn!("round {round}: peer {k} has no data and is skipped");
                }
                !empty
            })
            .collect();
        let models: Vec<ModelParams> = pool.install(|| {
            peers
                .par_iter()
                .map(|&k| {
                    let mut r = rng::stream(config.seed, Stream::PeerTraining, k as u64, round as u64);
                    local_train(&global, &setup.peer_data[k], &hp, &mut r)
                })
                .collect::<Result<_>>()
        })?;
        let gradients: Vec<UpdateGradient> =
            models.iter().map(|w| compute_update_gradient(&global, w, hp.lr)).collect::<Result<_>>()?;
        let sample_counts: Vec<usize> = peers.iter().map(|&k| setup.peer_data[k].len()).collect();
        let attackers: Vec<usize> = peers.iter().copied().filter(|&k| setup.attack.is_attacker(k)).collect();

        let mut excluded = Vec::new();
        let mut mode = None;
        let mut defense_seconds = 0.0;
        if !peers.is_empty() {
            let input = RoundInput {
                round,
                peers: &peers,
                models: &models,
                gradients: &gradients,
                sample_counts: &sample_counts,
                attackers_present: attackers.len(),
            };
            let started = Instant::now();
            let outcome = aggregator.aggregate(&input)?;
            defense_seconds = started.elapsed().as_secs_f64();
            log::debug!("round {round}: {} aggregation took {defense_seconds:.6}s", aggregator.kind());
            if opts.dump_features {
                dumps.push(feature_dump(round, &input, &outcome, &setup.attack)?);
            }
            match outcome.model {
                Some(model) => global = model,
                None => log::warn!("round {round}: every update was rejected; the global model is kept"),
            }
            mode = outcome.defense.as_ref().map(|d| d.mode);
            excluded = outcome.excluded;
        }

        let eval = evaluate(&global, &data.test, source, target)?;
        let (precision, recall) = detection_scores(&excluded, &attackers);
        reports.push(RoundReport {
            round,
            te: eval.te,
            all_acc: eval.all_acc,
            src_acc: eval.src_acc,
            asr: eval.asr,
            selected: peers.len(),
            attackers,
            excluded,
            precision,
            recall,
            mode,
            defense_seconds,
        });
    }
    Ok(ExperimentOutcome { setup, reports, dumps, final_model: global })
}
