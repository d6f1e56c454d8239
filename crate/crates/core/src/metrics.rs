//! Test-set evaluation, per-round records and run summaries.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::defense::DistributionMode;
use crate::error::{Error, Result};
use crate::nn::{forward, label_loss, ModelParams};

/// Global-model quality on the test set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean cross-entropy.
    pub te: f64,
    pub all_acc: f64,
    /// Accuracy on source-class examples; `None` if the test set has none.
    pub src_acc: Option<f64>,
    /// Share of source-class examples predicted as the target class.
    pub asr: Option<f64>,
}

pub fn evaluate(model: &ModelParams, test: &Dataset, source: usize, target: usize) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (mut loss, mut correct, mut src_total, mut src_correct, mut src_flipped) = (0.0, 0, 0, 0, 0);
    for (x, label) in test.examples() {
        let trace = forward(model, x)?;
        let pred = trace.predicted();
        loss += label_loss(&trace.probs, label);
        correct += usize::from(pred == label);
        if label == source {
            src_total += 1;
            src_correct += usize::from(pred == source);
            src_flipped += usize::from(pred == target);
        }
    }
    let n = test.len() as f64;
    let ratio = |k: usize| (src_total > 0).then(|| k as f64 / src_total as f64);
    Ok(Evaluation { te: loss / n, all_acc: correct as f64 / n, src_acc: ratio(src_correct), asr: ratio(src_flipped) })
}

/// Detection precision and recall of a flagged set against the true
/// attackers. Precision is `None` when nothing was flagged, recall when no
/// attacker took part.
pub fn detection_scores(flagged: &[usize], attackers: &[usize]) -> (Option<f64>, Option<f64>) {
    let hits = flagged.iter().filter(|p| attackers.contains(p)).count() as f64;
    let precision = (!flagged.is_empty()).then(|| hits / flagged.len() as f64);
    let recall = (!attackers.is_empty()).then(|| hits / attackers.len() as f64);
    (precision, recall)
}

/// Everything recorded about one communication round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub round: usize,
    pub te: f64,
    pub all_acc: f64,
    pub src_acc: Option<f64>,
    pub asr: Option<f64>,
    pub selected: usize,
    /// Attackers among the selected peers, ascending.
    pub attackers: Vec<usize>,
    /// Peers left out of (or zero-weighted in) the aggregate, ascending.
    pub excluded: Vec<usize>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Filter the label-flipping defense ran this round, if any.
    pub mode: Option<DistributionMode>,
    /// Wall-clock seconds spent in the aggregation rule; not serialized so
    /// that outputs stay reproducible.
    #[serde(skip)]
    pub defense_seconds: f64,
}

/// Population coefficient of variation `sigma / mu`; `NaN` when `mu == 0`.
pub fn coefficient_of_variation(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::contract("coefficient of variation of an empty series"));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let var = series.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Ok(if mean == 0.0 { f64::NAN } else { var.sqrt() / mean })
}

/// Rounds averaged for the end-of-run figures.
pub const SUMMARY_WINDOW: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub rounds: usize,
    /// Means over the last [`SUMMARY_WINDOW`] rounds (fewer for short runs).
    pub te: f64,
    pub all_acc: f64,
    pub src_acc: Option<f64>,
    pub asr: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// Coefficient of variation of source-class accuracy over the whole run.
    pub src_acc_cv: Option<f64>,
    /// The same, over rounds after the first [`SUMMARY_WINDOW`].
    pub src_acc_cv_late: Option<f64>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

pub fn summarize(reports: &[RoundReport]) -> Result<Summary> {
    if reports.is_empty() {
        return Err(Error::contract("cannot summarize an empty run"));
    }
    let tail = &reports[reports.len().saturating_sub(SUMMARY_WINDOW)..];
    let src: Vec<f64> = reports.iter().filter_map(|r| r.src_acc).collect();
    let late: Vec<f64> = reports.iter().filter(|r| r.round > SUMMARY_WINDOW).filter_map(|r| r.src_acc).collect();
    Ok(Summary {
        rounds: reports.len(),
        te: mean_of(tail.iter().map(|r| Some(r.te))).unwrap_or(f64::NAN),
        all_acc: mean_of(tail.iter().map(|r| Some(r.all_acc))).unwrap_or(f64::NAN),
        src_acc: mean_of(tail.iter().map(|r| r.src_acc)),
        asr: mean_of(tail.iter().map(|r| r.asr)),
        precision: mean_of(tail.iter().map(|r| r.precision)),
        recall: mean_of(tail.iter().map(|r| r.recall)),
        src_acc_cv: (!src.is_empty()).then(|| coefficient_of_variation(&src)).transpose()?,
        src_acc_cv_late: (!late.is_empty()).then(|| coefficient_of_variation(&late)).transpose()?,
    })
}
