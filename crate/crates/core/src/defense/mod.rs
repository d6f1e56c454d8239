//! The label-flipping defense: pick the two output neurons with the largest
//! gradient magnitudes, cluster the peers on those neurons' gradients, and
//! drop the suspicious cluster before averaging.
//!
//! Two filters share the extraction step. With iid or mildly skewed data the
//! honest and poisoned updates separate into two groups ([`filter_mild`]);
//! with single-class peers every class forms its own group and the attackers
//! sit next to the target class ([`filter_extreme`]).

mod extreme;
mod gradients;
mod mild;

pub use extreme::{filter_extreme, ExtremeFilter, MIN_CLUSTER_SIZE};
pub use gradients::{
    build_features_extreme, build_features_mild, detect_distribution_mode, identify_source_target,
    neuron_magnitudes, top2, DistributionMode, FeatureMatrix, NeuronMagnitudes, OutputLayerGradients,
};
pub use mild::{cluster_inverse_density, filter_mild, MildFilter};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which filter to run: forced by configuration or inferred each round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeSetting {
    #[default]
    Auto,
    Mild,
    Extreme,
}

impl std::str::FromStr for ModeSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "auto" => Ok(ModeSetting::Auto),
            "mild" => Ok(ModeSetting::Mild),
            "extreme" => Ok(ModeSetting::Extreme),
            other => Err(format!("unknown mode `{other}` (expected auto, mild or extreme)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefenseOutcome {
    pub mode: DistributionMode,
    /// Row indices (into the supplied gradients) judged bad, ascending.
    pub bad: Vec<usize>,
    /// Cluster label per row; `-1` marks HDBSCAN outliers.
    pub labels: Vec<i64>,
    pub features: FeatureMatrix,
    /// Presumed (source, target) neurons when the mild filter ran.
    pub source_target: Option<(usize, usize)>,
}

/// Runs the full defense on one round's output-layer gradients.
///
/// Rows must be ordered by ascending peer id; the mild filter breaks score
/// ties toward the cluster containing row 0. Too few peers for a filter
/// (fewer than 2 for mild, 3 for extreme) means nobody is flagged.
pub fn detect_bad_updates(
    olg: &OutputLayerGradients,
    mode: ModeSetting,
    extreme_threshold: usize,
    seed: u64,
) -> Result<DefenseOutcome> {
    let mode = match mode {
        ModeSetting::Mild => DistributionMode::Mild,
        ModeSetting::Extreme => DistributionMode::Extreme,
        ModeSetting::Auto => detect_distribution_mode(olg, extreme_threshold),
    };
    let n = olg.peers();
    match mode {
        DistributionMode::Mild => {
            let mag = neuron_magnitudes(olg);
            let (first, second) = identify_source_target(&mag);
            let features = build_features_mild(olg, first, second)?;
            if n < 2 {
                return Ok(DefenseOutcome { mode, bad: Vec::new(), labels: vec![0; n], features, source_target: Some((first, second)) });
            }
            let out = filter_mild(&features, seed)?;
            Ok(DefenseOutcome { mode, bad: out.bad, labels: out.labels, features, source_target: Some((first, second)) })
        }
        DistributionMode::Extreme => {
            if n < 3 {
                let mag = neuron_magnitudes(olg);
                let features = build_features_extreme(olg, &mag);
                return Ok(DefenseOutcome { mode, bad: Vec::new(), labels: vec![0; n], features, source_target: None });
            }
            let out = filter_extreme(olg)?;
            Ok(DefenseOutcome { mode, bad: out.bad, labels: out.labels, features: out.features, source_target: None })
        }
    }
}
