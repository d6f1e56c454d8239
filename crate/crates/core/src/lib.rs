//! Federated-learning simulator for label-flipping attacks, with a defense
//! that clusters peers on the output-layer gradients of the two neurons the
//! attack disturbs most.
//!
//! The pieces, bottom-up:
//!
//! * [`nn`]: a one-hidden-layer ReLU/softmax classifier with analytic
//!   gradients and momentum SGD;
//! * [`data`]: datasets, iid / Dirichlet / single-class partitions and the
//!   label-flipping injector;
//! * [`clustering`]: k-means, HDBSCAN and PCA on small dense matrices;
//! * [`defense`]: neuron selection, regime detection and the two filters;
//! * [`baselines`]: median, trimmed mean, repeated median, multi-Krum and
//!   FoolsGold;
//! * [`federation`]: rounds of selection, local training and aggregation;
//! * [`metrics`]: test error, accuracies, attack success and summaries;
//! * [`cli`]: sweeps and output files.
//!
//! ```
//! use lfshield::federation::{load_data, run_experiment, ExperimentConfig, RunOptions};
//!
//! let config = ExperimentConfig::from_toml(r#"
//!     seed = 1
//!     [dataset]
//!     kind = "synth"
//!     train_size = 400
//!     test_size = 100
//!     dim = 6
//!     [partition]
//!     regime = "iid"
//!     peers = 10
//!     [training]
//!     rounds = 3
//!     hidden = 8
//!     lr = 0.05
//!     momentum = 0.5
//!     local_epochs = 1
//!     batch_size = 10
//!     [attack]
//!     ratio = 0.3
//! "#)?;
//! let data = load_data(&config)?;
//! let outcome = run_experiment(&config, &data, RunOptions::default())?;
//! assert_eq!(outcome.reports.len(), 3);
//! # Ok::<(), lfshield::Error>(())
//! ```

pub mod baselines;
pub mod cli;
pub mod clustering;
pub mod data;
pub mod defense;
mod error;
pub mod federation;
pub mod metrics;
pub mod nn;
pub mod rng;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/model.md")]
    mod model {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/federation.md")]
    mod federation {}
    #[doc = include_str!("../../../book/src/defense.md")]
    mod defense {}
    #[doc = include_str!("../../../book/src/baselines.md")]
    mod baselines {}
    #[doc = include_str!("../../../book/src/experiments.md")]
    mod experiments {}
}
