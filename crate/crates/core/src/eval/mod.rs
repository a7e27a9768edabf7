//! Link-prediction evaluation: labeled pairs for the target snapshot, the
//! logistic predictor, AUC/MAP and heuristic baselines.

mod baselines;
mod metrics;
mod pairs;
mod predictor;

pub use baselines::{baseline_scores, Baseline};
pub use metrics::{auc, average_precision, group_by_node, map_metric, Candidate};
pub use pairs::{build_eval_set, EvalPairSet, LabeledPair, Split, SplitFractions};
pub use predictor::{fit_predictor, Predictor, PredictorConfig};

use serde::{Deserialize, Serialize};

use crate::dyngraph::SnapshotSequence;
use crate::error::Result;
use crate::tensor::Tensor;

/// AUC and MAP of one scoring method on one pair set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub method: String,
    pub seed: u64,
    /// Number of history snapshots used.
    pub t_used: usize,
    pub auc: f64,
    pub map: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    /// Fingerprint of the [`EvalPairSet`] the numbers were computed on.
    pub pairs_fingerprint: String,
}

impl MetricReport {
    pub const CSV_HEADER: &'static str = "dataset,method,seed,T_used,auc,map,n_pos,n_neg";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{},{}",
            self.dataset, self.method, self.seed, self.t_used, self.auc, self.map, self.n_pos, self.n_neg
        )
    }
}

/// AUC and MAP of `scores` over `pairs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub auc: f64,
    pub map: f64,
    pub n_pos: usize,
    pub n_neg: usize,
}

pub fn score_metrics(pairs: &[LabeledPair], scores: &[f64]) -> Result<Scores> {
    let labels: Vec<bool> = pairs.iter().map(|p| p.label).collect();
    let keys: Vec<(usize, usize)> = pairs.iter().map(|p| (p.u, p.v)).collect();
    let n_pos = labels.iter().filter(|&&l| l).count();
    Ok(Scores {
        auc: auc(scores, &labels)?,
        map: map_metric(&group_by_node(&keys, scores, &labels))?,
        n_pos,
        n_neg: labels.len() - n_pos,
    })
}

/// Fits the predictor on the train split of `set` using `z` (`[N, F]`) and
/// scores `eval_pairs`.
pub fn evaluate_embeddings(
    z: &Tensor,
    set: &EvalPairSet,
    eval_pairs: &[LabeledPair],
    cfg: &PredictorConfig,
) -> Result<Scores> {
    let predictor = fit_predictor(&set.train, z, cfg)?;
    score_metrics(eval_pairs, &predictor.score_pairs(z, eval_pairs))
}

pub fn evaluate_baseline(history: &SnapshotSequence, eval_pairs: &[LabeledPair], method: Baseline) -> Result<Scores> {
    score_metrics(eval_pairs, &baseline_scores(history, eval_pairs, method))
}
