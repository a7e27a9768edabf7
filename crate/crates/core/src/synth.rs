//! Synthetic dynamic graphs: a periodic block process, where the most
//! recent snapshot is a poor predictor, and a persistent-edge process, where
//! it is a good one.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::dyngraph::{IdMap, Snapshot, SnapshotSequence};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub num_nodes: usize,
    /// History length; the target is step `steps + 1`.
    pub steps: usize,
    pub seed: u64,
    /// Periodic process: activity period, block count and intra-block
    /// edge probability.
    pub period: usize,
    pub blocks: usize,
    pub intra_prob: f64,
    /// Persistent process: expected new edges per step and per-step survival
    /// probability of an existing edge.
    pub birth_rate: f64,
    pub survival: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            num_nodes: 40,
            steps: 6,
            seed: 0,
            period: 2,
            blocks: 4,
            intra_prob: 0.5,
            birth_rate: 2.0,
            survival: 0.9,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_nodes < 4 {
            return Err(Error::config("synthetic graphs need at least 4 nodes"));
        }
        if self.steps < 2 {
            return Err(Error::config("synthetic graphs need at least 2 steps"));
        }
        if self.period < 2 {
            return Err(Error::config("period must be at least 2"));
        }
        if self.blocks == 0 || self.blocks > self.num_nodes {
            return Err(Error::config("blocks must be in 1..=num_nodes"));
        }
        if !(self.intra_prob > 0.0 && self.intra_prob <= 1.0) {
            return Err(Error::config("intra_prob must be in (0, 1]"));
        }
        if !(0.0..=1.0).contains(&self.survival) {
            return Err(Error::config("survival must be in [0, 1]"));
        }
        if !(self.birth_rate.is_finite() && self.birth_rate > 0.0) {
            return Err(Error::config("birth_rate must be positive"));
        }
        Ok(())
    }

    /// Block of node `v`: contiguous, near-equal blocks.
    pub fn block_of(&self, v: usize) -> usize {
        v * self.blocks / self.num_nodes
    }

    /// Whether block `k` is active at (1-based) step `t`.
    pub fn block_active(&self, k: usize, t: usize) -> bool {
        k % self.period == t % self.period
    }
}

/// A generated history with the step that follows it.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthGraph {
    pub history: SnapshotSequence,
    pub target: Snapshot,
}

impl SynthGraph {
    fn from_edge_sets(n: usize, sets: Vec<BTreeSet<(usize, usize)>>) -> Result<Self> {
        let mut snaps = sets
            .into_iter()
            .enumerate()
            .map(|(i, e)| Snapshot::from_edges(i + 1, n, false, e.into_iter().map(|(u, v)| (u, v, 1.0))))
            .collect::<Result<Vec<_>>>()?;
        let target = snaps.pop().expect("at least two steps");
        Ok(Self {
            history: SnapshotSequence::new(snaps, n, IdMap::identity(n))?,
            target,
        })
    }

    /// History and target as one sequence of `steps + 1` snapshots.
    pub fn full_sequence(&self) -> SnapshotSequence {
        let mut snaps = self.history.snapshots().to_vec();
        snaps.push(self.target.clone());
        SnapshotSequence::new(snaps, self.history.node_count(), self.history.id_map().clone())
            .expect("consistent snapshots")
    }

    /// Edge-list text (`src dst time`), one line per edge, times `1..=steps+1`.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        for s in self.full_sequence().snapshots() {
            for (u, v, _) in s.edges() {
                writeln!(out, "{u} {v} {}", s.index).unwrap();
            }
        }
        out
    }
}

fn periodic_step(cfg: &SynthConfig, t: usize) -> BTreeSet<(usize, usize)> {
    let mut rng = derive_rng(cfg.seed, "periodic", t as u64);
    let mut edges = BTreeSet::new();
    for u in 0..cfg.num_nodes {
        for v in u + 1..cfg.num_nodes {
            let k = cfg.block_of(u);
            if k == cfg.block_of(v) && cfg.block_active(k, t) && rng.random::<f64>() < cfg.intra_prob {
                edges.insert((u, v));
            }
        }
    }
    edges
}

/// Blocks whose index is congruent to the step modulo the period are active;
/// each internal pair of an active block is linked with probability
/// `intra_prob`, drawn afresh at every step.
pub fn gen_periodic(cfg: &SynthConfig) -> Result<SynthGraph> {
    cfg.validate()?;
    let sets = (1..=cfg.steps + 1).map(|t| periodic_step(cfg, t)).collect();
    SynthGraph::from_edge_sets(cfg.num_nodes, sets)
}

fn random_pair(rng: &mut Rng, n: usize) -> (usize, usize) {
    loop {
        let u = rng.random_range(0..n);
        let v = rng.random_range(0..n);
        if u != v {
            return (u.min(v), u.max(v));
        }
    }
}

fn births(rng: &mut Rng, rate: f64, n: usize, edges: &mut BTreeSet<(usize, usize)>) {
    let count = Poisson::new(rate).expect("positive rate").sample(rng) as usize;
    for _ in 0..count {
        edges.insert(random_pair(rng, n));
    }
}

/// Each step, existing edges survive with probability `survival` and about
/// `birth_rate` uniformly random pairs are added. The first step starts from
/// the stationary edge count `birth_rate / (1 - survival)` (or `birth_rate`
/// when every edge survives).
pub fn gen_recency(cfg: &SynthConfig) -> Result<SynthGraph> {
    cfg.validate()?;
    let n = cfg.num_nodes;
    let mut edges = BTreeSet::new();
    let initial = if cfg.survival < 1.0 {
        cfg.birth_rate / (1.0 - cfg.survival)
    } else {
        cfg.birth_rate
    };
    let mut rng = derive_rng(cfg.seed, "recency", 1);
    births(&mut rng, initial, n, &mut edges);
    let mut sets = vec![edges.clone()];
    for t in 2..=cfg.steps + 1 {
        let mut rng = derive_rng(cfg.seed, "recency", t as u64);
        edges.retain(|_| rng.random::<f64>() < cfg.survival);
        births(&mut rng, cfg.birth_rate, n, &mut edges);
        sets.push(edges.clone());
    }
    SynthGraph::from_edge_sets(n, sets)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn active_blocks(cfg: &SynthConfig, s: &Snapshot) -> BTreeSet<usize> {
        s.edges().map(|(u, _, _)| cfg.block_of(u)).collect()
    }

    #[test]
    fn periodic_activity_repeats() {
        let cfg = SynthConfig::default();
        let g = gen_periodic(&cfg).unwrap();
        let seq = g.full_sequence();
        for t in 0..seq.len() - 2 {
            assert_eq!(active_blocks(&cfg, seq.snapshot(t)), active_blocks(&cfg, seq.snapshot(t + 2)));
        }
        for (u, v, _) in seq.snapshot(0).edges() {
            assert_eq!(cfg.block_of(u), cfg.block_of(v));
        }
    }

    #[test]
    fn full_probability_gives_cliques() {
        let cfg = SynthConfig {
            intra_prob: 1.0,
            ..SynthConfig::default()
        };
        let g = gen_periodic(&cfg).unwrap();
        // blocks of 10 nodes, two active per step
        assert_eq!(g.history.snapshot(0).edge_count(), 2 * 45);
    }

    #[test]
    fn full_survival_only_grows() {
        let cfg = SynthConfig {
            survival: 1.0,
            ..SynthConfig::default()
        };
        let seq = gen_recency(&cfg).unwrap().full_sequence();
        for t in 1..seq.len() {
            for (u, v, _) in seq.snapshot(t - 1).edges() {
                assert!(seq.snapshot(t).has_edge(u, v));
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(gen_periodic(&cfg).unwrap(), gen_periodic(&cfg).unwrap());
        assert_eq!(gen_recency(&cfg).unwrap(), gen_recency(&cfg).unwrap());
        let other = SynthConfig { seed: 1, ..cfg.clone() };
        assert_ne!(gen_periodic(&cfg).unwrap(), gen_periodic(&other).unwrap());
    }
}
