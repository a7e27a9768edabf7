use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dyngraph::{Snapshot, SnapshotSequence};
use crate::error::{Error, Result};
use crate::rng::derive_rng;

/// Train and validation fractions; the test split takes the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self { train: 0.20, val: 0.10 }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..=1.0).contains(&self.train)
            && (0.0..=1.0).contains(&self.val)
            && self.train + self.val <= 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!(
                "invalid split fractions train={} val={}",
                self.train, self.val
            )))
        }
    }

    /// Split sizes for `n` items: floor, floor, remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (n as f64 * self.train).floor() as usize;
        let val = ((n as f64 * self.val).floor() as usize).min(n - train);
        (train, val, n - train - val)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Val,
    Test,
}

/// An unordered node pair with its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub u: usize,
    pub v: usize,
    pub label: bool,
}

/// Labeled node pairs for the target snapshot, split three ways.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPairSet {
    pub train: Vec<LabeledPair>,
    pub val: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    pub fractions: SplitFractions,
    pub seed: u64,
}

impl EvalPairSet {
    pub fn split(&self, which: Split) -> &[LabeledPair] {
        match which {
            Split::Train => &self.train,
            Split::Val => &self.val,
            Split::Test => &self.test,
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &LabeledPair> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }

    pub fn num_positives(&self) -> usize {
        self.all().filter(|p| p.label).count()
    }

    pub fn num_negatives(&self) -> usize {
        self.all().filter(|p| !p.label).count()
    }

    /// SHA-256 over the split contents, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for (tag, part) in [(b'T', &self.train), (b'V', &self.val), (b'E', &self.test)] {
            h.update([tag]);
            for p in part {
                h.update((p.u as u64).to_le_bytes());
                h.update((p.v as u64).to_le_bytes());
                h.update([p.label as u8]);
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Labeled pairs for predicting `target` from `history`.
///
/// Positives are the undirected edges of `target` whose endpoints both appear
/// in some history snapshot; negatives are an equal number of distinct
/// uniformly drawn non-edges of `target` among the same nodes. Positives and
/// negatives are shuffled separately and split by `fractions`.
pub fn build_eval_set(
    history: &SnapshotSequence,
    target: &Snapshot,
    fractions: SplitFractions,
    seed: u64,
) -> Result<EvalPairSet> {
    fractions.validate()?;
    if target.node_count() != history.node_count() {
        return Err(Error::Eval(format!(
            "target has {} nodes, history has {}",
            target.node_count(),
            history.node_count()
        )));
    }
    let active = history.active_nodes();
    let nodes: Vec<usize> = (0..active.len()).filter(|&v| active[v]).collect();
    let linked = |u: usize, v: usize| target.has_edge(u, v) || target.has_edge(v, u);

    let positives: BTreeSet<(usize, usize)> = target
        .edges()
        .filter(|&(u, v, _)| active[u] && active[v])
        .map(|(u, v, _)| (u.min(v), u.max(v)))
        .collect();
    if positives.is_empty() {
        return Err(Error::Eval("target snapshot has no edges among known nodes".into()));
    }
    let m = nodes.len();
    let possible = m * (m - 1) / 2;
    let density = positives.len() as f64 / possible as f64;
    if density > 0.95 || possible - positives.len() < positives.len() {
        return Err(Error::Eval(format!(
            "target too dense to sample {} negatives (density {density:.3})",
            positives.len()
        )));
    }

    let mut rng = derive_rng(seed, "eval.negatives", 0);
    let mut negatives: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut drawn = Vec::with_capacity(positives.len());
    while drawn.len() < positives.len() {
        let a = nodes[rng.random_range(0..m)];
        let b = nodes[rng.random_range(0..m)];
        if a == b || linked(a, b) {
            continue;
        }
        let key = (a.min(b), a.max(b));
        if negatives.insert(key) {
            drawn.push(key);
        }
    }

    let mut pos: Vec<(usize, usize)> = positives.into_iter().collect();
    pos.shuffle(&mut derive_rng(seed, "eval.shuffle", 0));
    drawn.shuffle(&mut derive_rng(seed, "eval.shuffle", 1));

    let (tp, vp, _) = fractions.sizes(pos.len());
    let (tn, vn, _) = fractions.sizes(drawn.len());
    let label = |pairs: &[(usize, usize)], l: bool| -> Vec<LabeledPair> {
        pairs.iter().map(|&(u, v)| LabeledPair { u, v, label: l }).collect()
    };
    let part = |p: &[(usize, usize)], n: &[(usize, usize)]| {
        let mut out = label(p, true);
        out.extend(label(n, false));
        out
    };
    Ok(EvalPairSet {
        train: part(&pos[..tp], &drawn[..tn]),
        val: part(&pos[tp..tp + vp], &drawn[tn..tn + vn]),
        test: part(&pos[tp + vp..], &drawn[tn + vn..]),
        fractions,
        seed,
    })
}
