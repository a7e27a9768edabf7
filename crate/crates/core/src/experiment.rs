//! End-to-end runs: train on a history, evaluate on the following snapshot,
//! compare with baselines and across architecture variants.

use serde::{Deserialize, Serialize};

use crate::dyngraph::{Snapshot, SnapshotSequence};
use crate::error::Result;
use crate::eval::{build_eval_set, evaluate_baseline, evaluate_embeddings, Baseline, EvalPairSet, MetricReport, Scores};
use crate::model::{model_forward, ModelConfig, Variant};
use crate::rng::derive_seed;
use crate::sampling::WalkConfig;
use crate::tensor::ParameterSet;
use crate::training::{train, TrainConfig, TrainReport};

/// Everything a run needs besides the data.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub model: ModelConfig,
    pub walk: WalkConfig,
    pub train: TrainConfig,
}

/// Test pairs for predicting `target` from `history` under `settings`.
pub fn eval_pairs(history: &SnapshotSequence, target: &Snapshot, settings: &RunSettings) -> Result<EvalPairSet> {
    build_eval_set(history, target, settings.train.split, derive_seed(settings.train.seed, "eval", 0))
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub params: ParameterSet,
    pub report: TrainReport,
    pub pairs: EvalPairSet,
    pub model: Scores,
}

/// Trains on `history` and scores the model on the test split of the pairs
/// built from `target`.
pub fn train_and_evaluate(history: &SnapshotSequence, target: &Snapshot, settings: &RunSettings) -> Result<RunOutcome> {
    let pairs = eval_pairs(history, target, settings)?;
    let (params, report) = train(history, &settings.model, &settings.walk, &settings.train)?;
    let model = evaluate_model(history, &params, &settings.model, &pairs, settings)?;
    Ok(RunOutcome {
        params,
        report,
        pairs,
        model,
    })
}

/// Scores trained parameters: predictor fit on the train split, metrics on
/// the test split, embeddings from the last history step.
pub fn evaluate_model(
    history: &SnapshotSequence,
    params: &ParameterSet,
    model: &ModelConfig,
    pairs: &EvalPairSet,
    settings: &RunSettings,
) -> Result<Scores> {
    let cube = model_forward(history, params, model)?;
    evaluate_embeddings(&cube.last_step(), pairs, &pairs.test, &settings.train.predictor)
}

pub fn evaluate_baselines(history: &SnapshotSequence, pairs: &EvalPairSet) -> Result<Vec<(Baseline, Scores)>> {
    Baseline::ALL
        .iter()
        .map(|&b| Ok((b, evaluate_baseline(history, &pairs.test, b)?)))
        .collect()
}

pub fn metric_report(dataset: &str, method: &str, seed: u64, t_used: usize, scores: &Scores, pairs: &EvalPairSet) -> MetricReport {
    MetricReport {
        dataset: dataset.to_string(),
        method: method.to_string(),
        seed,
        t_used,
        auc: scores.auc,
        map: scores.map,
        n_pos: scores.n_pos,
        n_neg: scores.n_neg,
        pairs_fingerprint: pairs.fingerprint(),
    }
}

/// Trains and scores every architecture variant with otherwise identical
/// settings, in [`Variant::ALL`] order.
pub fn ablation(history: &SnapshotSequence, target: &Snapshot, settings: &RunSettings) -> Result<Vec<(Variant, RunOutcome)>> {
    Variant::ALL
        .iter()
        .map(|&variant| {
            let mut s = settings.clone();
            s.model.variant = variant;
            Ok((variant, train_and_evaluate(history, target, &s)?))
        })
        .collect()
}
