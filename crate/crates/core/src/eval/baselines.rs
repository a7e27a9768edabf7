use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use crate::dyngraph::{Snapshot, SnapshotSequence};
use crate::error::{Error, Result};

use super::LabeledPair;

/// Heuristic link scorers used as reference points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    /// Weight of the pair in the most recent snapshot.
    LastAdjacency,
    /// Number of common neighbors in the weight-summed aggregate of all
    /// history snapshots.
    AggregatedCommonNeighbors,
}

impl Baseline {
    pub const ALL: [Baseline; 2] = [Baseline::LastAdjacency, Baseline::AggregatedCommonNeighbors];

    pub fn label(self) -> &'static str {
        match self {
            Baseline::LastAdjacency => "last-adjacency",
            Baseline::AggregatedCommonNeighbors => "aggregated-common-neighbors",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "last-adjacency" => Ok(Baseline::LastAdjacency),
            "aggregated-common-neighbors" => Ok(Baseline::AggregatedCommonNeighbors),
            other => Err(Error::Eval(format!("unknown baseline `{other}`"))),
        }
    }
}

fn undirected_neighbors(s: &Snapshot) -> Vec<BTreeSet<usize>> {
    let mut sets = vec![BTreeSet::new(); s.node_count()];
    for (u, v, _) in s.edges() {
        sets[u].insert(v);
        sets[v].insert(u);
    }
    sets
}

/// Baseline scores for `pairs` given the history snapshots.
pub fn baseline_scores(seq: &SnapshotSequence, pairs: &[LabeledPair], method: Baseline) -> Vec<f64> {
    match method {
        Baseline::LastAdjacency => {
            let last = seq.last();
            pairs
                .iter()
                .map(|p| last.weight(p.u, p.v).max(last.weight(p.v, p.u)))
                .collect()
        }
        Baseline::AggregatedCommonNeighbors => {
            let nbrs = undirected_neighbors(&seq.aggregate());
            pairs
                .iter()
                .map(|p| nbrs[p.u].intersection(&nbrs[p.v]).count() as f64)
                .collect()
        }
    }
}
