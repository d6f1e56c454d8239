//! Experiment configuration, read from TOML.
//!
//! ```toml
//! seed = 42
//!
//! [dataset]
//! kind = "idx"                 # or "synth"
//! train_images = "data/digits/train-images-idx3-ubyte"
//! train_labels = "data/digits/train-labels-idx1-ubyte"
//! test_images = "data/digits/test-images-idx3-ubyte"
//! test_labels = "data/digits/test-labels-idx1-ubyte"
//!
//! [partition]
//! regime = "iid"               # iid | mild | extreme
//! peers = 20
//! alpha = 1.0                  # Dirichlet concentration (mild only)
//!
//! [training]
//! rounds = 30
//! fraction = 1.0               # share of peers selected per round
//! hidden = 32
//! lr = 0.01
//! momentum = 0.9
//! local_epochs = 3
//! batch_size = 16
//!
//! [attack]
//! ratio = 0.3
//! source = 7
//! target = 1
//! # attackers = [0, 4, 9]      # explicit ids instead of sampling
//!
//! [defense]
//! name = "ours"                # fedavg | median | rmedian | tmean | mkrum | fgold | ours
//! mode = "auto"                # auto | mild | extreme
//! extreme_threshold = 1
//! # assumed_fraction = 0.3     # attacker share granted to tmean / mkrum
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Regime;
use crate::defense::ModeSetting;
use crate::error::{Error, Result};
use crate::nn::Hyperparams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub partition: PartitionConfig,
    pub training: TrainingConfig,
    #[serde(default)]
    pub attack: AttackConfig,
    #[serde(default)]
    pub defense: DefenseConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetConfig {
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        #[serde(default = "default_classes")]
        classes: usize,
    },
    Synth {
        #[serde(default = "default_classes")]
        classes: usize,
        train_size: usize,
        test_size: usize,
        dim: usize,
        #[serde(default = "default_spread")]
        spread: f64,
    },
}

fn default_classes() -> usize {
    10
}

fn default_spread() -> f64 {
    1.0
}

impl DatasetConfig {
    pub fn classes(&self) -> usize {
        match self {
            DatasetConfig::Idx { classes, .. } | DatasetConfig::Synth { classes, .. } => *classes,
        }
    }

    /// Resolves relative IDX paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        if let DatasetConfig::Idx { train_images, train_labels, test_images, test_labels, .. } = self {
            for p in [train_images, train_labels, test_images, test_labels] {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub regime: Regime,
    pub peers: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub rounds: usize,
    #[serde(default = "default_fraction")]
    pub fraction: f64,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub lr: f64,
    #[serde(default)]
    pub momentum: f64,
    pub local_epochs: usize,
    pub batch_size: usize,
}

fn default_fraction() -> f64 {
    1.0
}

fn default_hidden() -> usize {
    32
}

impl TrainingConfig {
    pub fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            lr: self.lr,
            momentum: self.momentum,
            local_epochs: self.local_epochs,
            batch_size: self.batch_size,
        }
    }

    /// Peers selected per round: `max(floor(fraction * peers), 1)`.
    pub fn selected_per_round(&self, peers: usize) -> usize {
        ((self.fraction * peers as f64).floor() as usize).clamp(1, peers.max(1))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttackConfig {
    #[serde(default)]
    pub ratio: f64,
    #[serde(default = "default_source")]
    pub source: usize,
    #[serde(default = "default_target")]
    pub target: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attackers: Option<Vec<usize>>,
}

fn default_source() -> usize {
    7
}

fn default_target() -> usize {
    1
}

impl Default for AttackConfig {
    fn default() -> Self {
        AttackConfig { ratio: 0.0, source: default_source(), target: default_target(), attackers: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DefenseKind {
    FedAvg,
    Median,
    RMedian,
    TMean,
    MKrum,
    FGold,
    #[default]
    Ours,
}

impl DefenseKind {
    pub const ALL: [DefenseKind; 7] = [
        DefenseKind::FedAvg,
        DefenseKind::Median,
        DefenseKind::RMedian,
        DefenseKind::TMean,
        DefenseKind::MKrum,
        DefenseKind::FGold,
        DefenseKind::Ours,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DefenseKind::FedAvg => "fedavg",
            DefenseKind::Median => "median",
            DefenseKind::RMedian => "rmedian",
            DefenseKind::TMean => "tmean",
            DefenseKind::MKrum => "mkrum",
            DefenseKind::FGold => "fgold",
            DefenseKind::Ours => "ours",
        }
    }
}

impl fmt::Display for DefenseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DefenseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DefenseKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::config(format!("unknown defense `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefenseConfig {
    #[serde(default)]
    pub name: DefenseKind,
    #[serde(default)]
    pub mode: ModeSetting,
    #[serde(default = "default_extreme_threshold")]
    pub extreme_threshold: usize,
    /// Attacker share assumed by tmean / mkrum; defaults to the true share.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assumed_fraction: Option<f64>,
}

fn default_extreme_threshold() -> usize {
    1
}

impl Default for DefenseConfig {
    fn default() -> Self {
        DefenseConfig {
            name: DefenseKind::Ours,
            mode: ModeSetting::Auto,
            extreme_threshold: default_extreme_threshold(),
            assumed_fraction: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Checks every field that can be checked without loading data.
    pub fn validate(&self) -> Result<()> {
        let t = &self.training;
        if t.rounds == 0 {
            return Err(Error::config("rounds must be at least 1"));
        }
        if !(t.fraction > 0.0 && t.fraction <= 1.0) {
            return Err(Error::config(format!("peer fraction must lie in (0, 1], got {}", t.fraction)));
        }
        if t.hidden == 0 {
            return Err(Error::config("hidden width must be positive"));
        }
        t.hyperparams().validate()?;
        if self.partition.peers == 0 {
            return Err(Error::config("peer count must be positive"));
        }
        let classes = self.dataset.classes();
        if classes < 2 {
            return Err(Error::config("at least two classes are required"));
        }
        let a = &self.attack;
        if !(0.0..=1.0).contains(&a.ratio) {
            return Err(Error::config(format!("attacker ratio must lie in [0, 1], got {}", a.ratio)));
        }
        if a.source == a.target {
            return Err(Error::config("source and target classes must differ"));
        }
        if a.source >= classes || a.target >= classes {
            return Err(Error::config("source/target class outside the label range"));
        }
        if let Some(f) = self.defense.assumed_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config(format!("assumed attacker fraction must lie in [0, 1], got {f}")));
            }
        }
        if let DatasetConfig::Synth { train_size, test_size, dim, spread, .. } = &self.dataset {
            if *train_size == 0 || *test_size == 0 || *dim == 0 || !(*spread >= 0.0) {
                return Err(Error::config("synthetic dataset sizes must be positive"));
            }
        }
        Ok(())
    }
}
