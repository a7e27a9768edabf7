//! Unsupervised training: walk co-occurrence loss over all training
//! snapshots, Adam updates over node minibatches, early stopping on a
//! held-out link-prediction signal.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dyngraph::SnapshotSequence;
use crate::error::{Error, Result};
use crate::eval::{build_eval_set, evaluate_embeddings, EvalPairSet, LabeledPair, PredictorConfig, SplitFractions};
use crate::model::{forward, init_params, model_forward, GraphInputs, ModelConfig};
use crate::rng::{derive_rng, derive_seed};
use crate::sampling::{sample_batch, PairBatch, WalkConfig};
use crate::tensor::{adam_step, AdamState, ParameterSet, Tape, Tensor, Var};

const LOG_LO: f64 = 1e-12;
const LOG_HI: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    /// Weight of the negative-sample term.
    pub negative_weight: f64,
    /// Anchor nodes per optimizer step.
    pub batch_size: usize,
    /// Epochs without a validation AUC improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Reuse the first epoch's samples in every epoch.
    pub frozen_samples: bool,
    pub predictor: PredictorConfig,
    pub split: SplitFractions,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-3,
            negative_weight: 0.01,
            batch_size: 256,
            patience: 20,
            seed: 0,
            frozen_samples: false,
            predictor: PredictorConfig::default(),
            split: SplitFractions::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("epochs must be positive"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::config(format!("invalid learning rate {}", self.lr)));
        }
        if !(self.negative_weight.is_finite() && self.negative_weight > 0.0) {
            return Err(Error::config("negative_weight must be positive"));
        }
        if self.batch_size == 0 || self.patience == 0 {
            return Err(Error::config("batch_size and patience must be positive"));
        }
        self.split.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub val_auc: Option<f64>,
    pub val_map: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Index into `epochs` of the returned parameters.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub num_nodes: usize,
    pub num_snapshots: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub walk: WalkConfig,
    /// Seconds per epoch. Not serialized, so reports stay reproducible.
    #[serde(skip)]
    pub wall_time_secs: Vec<f64>,
}

impl TrainReport {
    pub fn losses(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss).collect()
    }

    pub fn best_val_auc(&self) -> Option<f64> {
        self.epochs.get(self.best_epoch).and_then(|e| e.val_auc)
    }
}

/// Records the walk loss on `tape`.
///
/// `z` is the `[N, T, F]` embedding cube; batch snapshot `t` (1-based) refers
/// to step `t - 1`. When `anchors` is given only pairs whose anchor `v` is
/// marked contribute.
///
/// `L = Σ count · (−log σ(⟨z_u, z_v⟩)) − w_n · Σ count · log(1 − σ(⟨z_u', z_v⟩))`
/// with log arguments clamped to `[1e-12, 1 − 1e-12]`.
pub fn walk_loss(
    tape: &mut Tape,
    z: Var,
    batches: &[PairBatch],
    negative_weight: f64,
    anchors: Option<&[bool]>,
) -> Result<Var> {
    let shape = tape.shape(z).to_vec();
    if shape.len() != 3 {
        return Err(Error::invalid(format!("embedding cube must be rank 3, got {shape:?}")));
    }
    let (n, steps, f) = (shape[0], shape[1], shape[2]);
    if batches.is_empty() {
        return Err(Error::NoSignal("empty batch set".into()));
    }
    let keep = |v: usize| anchors.is_none_or(|a| a[v]);
    let collect = |pairs: &[(usize, usize, f64)], t: usize, rows: &mut (Vec<usize>, Vec<usize>, Vec<f64>)| -> Result<()> {
        if t == 0 || t > steps {
            return Err(Error::config(format!("batch snapshot {t} outside 1..={steps}")));
        }
        for &(v, u, c) in pairs {
            if v >= n || u >= n {
                return Err(Error::config(format!("pair ({v}, {u}) outside {n} nodes")));
            }
            if keep(v) {
                rows.0.push(v * steps + t - 1);
                rows.1.push(u * steps + t - 1);
                rows.2.push(c);
            }
        }
        Ok(())
    };
    let mut pos = (Vec::new(), Vec::new(), Vec::new());
    let mut neg = (Vec::new(), Vec::new(), Vec::new());
    for b in batches {
        collect(&b.positives, b.snapshot, &mut pos)?;
        collect(&b.negatives, b.snapshot, &mut neg)?;
    }
    let flat = tape.reshape(z, &[n * steps, f])?;
    let mut terms = Vec::new();
    for ((anchor, other, counts), sign, weight) in [(pos, 1.0, 1.0), (neg, -1.0, negative_weight)] {
        if anchor.is_empty() {
            continue;
        }
        let len = counts.len();
        let a = tape.gather_rows(flat, &anchor)?;
        let b = tape.gather_rows(flat, &other)?;
        let s = tape.row_dot(a, b)?;
        let s = tape.scale(s, sign);
        let p = tape.sigmoid(s);
        let logp = tape.log_clamped(p, LOG_LO, LOG_HI);
        let w = tape.constant(Tensor::new(vec![len], counts.iter().map(|c| -weight * c).collect())?);
        let weighted = tape.mul(logp, w)?;
        terms.push(tape.sum(weighted));
    }
    match terms.as_slice() {
        [] => {
            let zero = tape.constant(Tensor::scalar(0.0));
            Ok(zero)
        }
        [one] => Ok(*one),
        [a, b] => tape.add(*a, *b),
        _ => unreachable!(),
    }
}

/// Value of the walk loss for fixed embeddings.
pub fn bce_walk_loss(z: &Tensor, batches: &[PairBatch], negative_weight: f64) -> Result<f64> {
    let mut tape = Tape::new();
    let zv = tape.constant(z.clone());
    let loss = walk_loss(&mut tape, zv, batches, negative_weight, None)?;
    Ok(tape.value(loss).item())
}

/// Pair batches for the snapshots of `seq`; empty snapshots are skipped.
pub fn sample_batches(seq: &SnapshotSequence, walk: &WalkConfig, seed: u64) -> Result<Vec<PairBatch>> {
    let mut batches = Vec::new();
    for s in seq.snapshots() {
        if s.is_empty() {
            continue;
        }
        let b = sample_batch(s, walk, seed)?;
        if !b.positives.is_empty() {
            batches.push(b);
        }
    }
    if batches.is_empty() {
        return Err(Error::NoSignal("no training snapshot has edges".into()));
    }
    Ok(batches)
}

/// Held-out signal: pairs of the final snapshot predicted from the others.
struct Validation {
    set: EvalPairSet,
    pairs: Vec<LabeledPair>,
}

impl Validation {
    fn build(seq: &SnapshotSequence, cfg: &TrainConfig) -> Option<Self> {
        let history = seq.prefix(seq.len() - 1).ok()?;
        let set = match build_eval_set(&history, seq.last(), cfg.split, derive_seed(cfg.seed, "validation", 0)) {
            Ok(set) => set,
            Err(e) => {
                log::warn!("no validation signal: {e}");
                return None;
            }
        };
        let pairs: Vec<LabeledPair> = set.val.iter().chain(&set.test).copied().collect();
        let classes = (pairs.iter().any(|p| p.label), pairs.iter().any(|p| !p.label));
        let train_classes = (set.train.iter().any(|p| p.label), set.train.iter().any(|p| !p.label));
        if classes != (true, true) || train_classes != (true, true) {
            log::warn!("validation pairs too few to score");
            return None;
        }
        Some(Self { set, pairs })
    }

    fn score(&self, history: &SnapshotSequence, params: &ParameterSet, model: &ModelConfig, cfg: &TrainConfig) -> Result<(f64, f64)> {
        let cube = model_forward(history, params, model)?;
        let s = evaluate_embeddings(&cube.last_step(), &self.set, &self.pairs, &cfg.predictor)?;
        Ok((s.auc, s.map))
    }
}

/// Trains on `seq`. The last snapshot is held out of the loss and used only
/// to build validation pairs; the returned parameters are those of the
/// epoch with the best validation AUC (the last epoch when no validation
/// signal exists).
pub fn train(
    seq: &SnapshotSequence,
    model: &ModelConfig,
    walk: &WalkConfig,
    cfg: &TrainConfig,
) -> Result<(ParameterSet, TrainReport)> {
    cfg.validate()?;
    walk.validate()?;
    model.validate()?;
    if seq.len() < 2 {
        return Err(Error::config(format!("training needs at least 2 snapshots, got {}", seq.len())));
    }
    let n = seq.node_count();
    let history = seq.prefix(seq.len() - 1)?;
    let inputs = GraphInputs::new(&history);
    let validation = Validation::build(seq, cfg);

    let mut params = init_params(model, n, seq.len(), cfg.seed)?;
    let mut adam = AdamState::default();
    let mut best: Option<(f64, usize, ParameterSet)> = None;
    let mut records = Vec::new();
    let mut wall = Vec::new();
    let mut stopped_early = false;
    let mut frozen: Option<Vec<PairBatch>> = None;

    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let batches = match (&frozen, cfg.frozen_samples) {
            (Some(b), true) => b.clone(),
            _ => {
                let b = sample_batches(&history, walk, derive_seed(cfg.seed, "samples", epoch as u64))?;
                if cfg.frozen_samples {
                    frozen = Some(b.clone());
                }
                b
            }
        };

        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut derive_rng(cfg.seed, "minibatch", epoch as u64));
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let mut anchors = vec![false; n];
            for &v in chunk {
                anchors[v] = true;
            }
            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let out = forward(&mut tape, &inputs, &bound, model)?;
            let loss = walk_loss(&mut tape, out.z, &batches, cfg.negative_weight, Some(&anchors))?;
            let value = tape.value(loss).item();
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, loss: value });
            }
            epoch_loss += value;
            let grads = tape.backward(loss)?;
            let grads = bound.gradients(&tape, &grads);
            adam_step(&mut params, &grads, &mut adam, cfg.lr).map_err(|e| match e {
                Error::NonFiniteGradient(_) => Error::Divergence { epoch, loss: value },
                other => other,
            })?;
        }

        let (val_auc, val_map) = match &validation {
            Some(v) => {
                let (a, m) = v.score(&history, &params, model, cfg)?;
                (Some(a), Some(m))
            }
            None => (None, None),
        };
        log::debug!("epoch {epoch}: loss {epoch_loss:.6} val_auc {val_auc:?}");
        records.push(EpochRecord {
            epoch,
            loss: epoch_loss,
            val_auc,
            val_map,
        });
        wall.push(started.elapsed().as_secs_f64());

        if let Some(auc) = val_auc {
            if best.as_ref().is_none_or(|b| auc > b.0) {
                best = Some((auc, epoch, params.clone()));
            } else if epoch - best.as_ref().unwrap().1 >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, final_params) = match best {
        Some((_, epoch, p)) => (epoch, p),
        None => (records.len() - 1, params),
    };
    let report = TrainReport {
        epochs: records,
        best_epoch,
        stopped_early,
        num_nodes: n,
        num_snapshots: seq.len(),
        model: model.clone(),
        train: cfg.clone(),
        walk: walk.clone(),
        wall_time_secs: wall,
    };
    Ok((final_params, report))
}
