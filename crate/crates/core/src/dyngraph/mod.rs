//! Discrete-time dynamic graphs.
//!
//! Timestamped edge events are parsed from a whitespace-separated edge list,
//! re-labelled densely in first-appearance order and binned into `T`
//! equal-width time windows. Each window becomes one weighted [`Snapshot`]
//! over a fixed node universe.

mod cache;
mod parse;

use std::collections::BTreeMap;

use log::warn;

use crate::error::{Error, Result};

pub use cache::{
    is_snapshot_cache, load_snapshot_cache, read_snapshot_cache, save_snapshot_cache,
    write_snapshot_cache,
};
pub use parse::{parse_edge_events, parse_edge_file, IdMap, ParsedEvents};

/// One timestamped interaction between two dense node ids.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeEvent {
    pub src: usize,
    pub dst: usize,
    pub time: f64,
    pub weight: f64,
}

impl EdgeEvent {
    pub fn new(src: usize, dst: usize, time: f64, weight: f64) -> Self {
        Self {
            src,
            dst,
            time,
            weight,
        }
    }
}

/// Weighted adjacency of one time window.
///
/// Neighbor lists are sorted by neighbor id and contain no duplicates. In
/// undirected mode every entry `(v, u, w)` has a mirror `(u, v, w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    /// 1-based position in the sequence.
    pub index: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    directed: bool,
}

impl Snapshot {
    /// Builds a snapshot from `(u, v, w)` triples. Repeated pairs are summed,
    /// self-pairs dropped.
    pub fn from_edges<I>(index: usize, node_count: usize, directed: bool, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (u, v, w) in edges {
            if u >= node_count || v >= node_count {
                return Err(Error::config(format!(
                    "edge ({u}, {v}) outside node universe of size {node_count}"
                )));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::config(format!("edge ({u}, {v}) has invalid weight {w}")));
            }
            if u == v {
                continue;
            }
            let key = if directed { (u, v) } else { (u.min(v), u.max(v)) };
            *acc.entry(key).or_insert(0.0) += w;
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for ((u, v), w) in acc {
            adjacency[u].push((v, w));
            if !directed {
                adjacency[v].push((u, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(n, _)| n);
        }
        Ok(Self {
            index,
            adjacency,
            directed,
        })
    }

    pub(crate) fn from_adjacency(index: usize, adjacency: Vec<Vec<(usize, f64)>>, directed: bool) -> Self {
        Self {
            index,
            adjacency,
            directed,
        }
    }

    pub fn empty(index: usize, node_count: usize, directed: bool) -> Self {
        Self::from_adjacency(index, vec![Vec::new(); node_count], directed)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn adjacency(&self) -> &[Vec<(usize, f64)>] {
        &self.adjacency
    }

    /// Weight of `(u, v)`, zero when absent.
    pub fn weight(&self, u: usize, v: usize) -> f64 {
        let list = &self.adjacency[u];
        match list.binary_search_by_key(&v, |&(n, _)| n) {
            Ok(i) => list[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.weight(u, v) > 0.0
    }

    /// Edges as `(u, v, w)`; undirected edges are listed once with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let directed = self.directed;
        self.adjacency.iter().enumerate().flat_map(move |(u, list)| {
            list.iter()
                .filter(move |&&(v, _)| directed || u < v)
                .map(move |&(v, w)| (u, v, w))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.iter().all(Vec::is_empty)
    }

    /// Sum of all adjacency entries (each undirected edge counted twice).
    pub fn total_weight(&self) -> f64 {
        self.adjacency.iter().flatten().map(|&(_, w)| w).sum()
    }

    /// Same topology with every weight replaced by 1.
    pub fn binarized(&self) -> Self {
        let adjacency = self
            .adjacency
            .iter()
            .map(|list| list.iter().map(|&(n, _)| (n, 1.0)).collect())
            .collect();
        Self::from_adjacency(self.index, adjacency, self.directed)
    }
}

/// Weighted degree of every node; isolated nodes get 0.
pub fn node_degrees(snapshot: &Snapshot) -> Vec<f64> {
    snapshot
        .adjacency
        .iter()
        .map(|list| list.iter().map(|&(_, w)| w).sum())
        .collect()
}

/// An ordered run of snapshots sharing one node universe.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotSequence {
    snapshots: Vec<Snapshot>,
    node_count: usize,
    id_map: IdMap,
}

impl SnapshotSequence {
    pub fn new(snapshots: Vec<Snapshot>, node_count: usize, id_map: IdMap) -> Result<Self> {
        if snapshots.is_empty() {
            return Err(Error::config("a snapshot sequence needs at least one snapshot"));
        }
        for (i, s) in snapshots.iter().enumerate() {
            if s.node_count() != node_count {
                return Err(Error::config(format!(
                    "snapshot {} has {} nodes, expected {node_count}",
                    i + 1,
                    s.node_count()
                )));
            }
            if s.index != i + 1 {
                return Err(Error::config(format!(
                    "snapshot at position {} carries index {}",
                    i + 1,
                    s.index
                )));
            }
        }
        Ok(Self {
            snapshots,
            node_count,
            id_map,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn len(&self) -> usize {
        self.snapshots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.snapshots.is_empty()
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn snapshot(&self, t: usize) -> &Snapshot {
        &self.snapshots[t]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("sequence is non-empty")
    }

    pub fn id_map(&self) -> &IdMap {
        &self.id_map
    }

    pub fn is_directed(&self) -> bool {
        self.snapshots[0].is_directed()
    }

    /// The first `k` snapshots.
    pub fn prefix(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.len() {
            return Err(Error::config(format!(
                "cannot take {k} snapshots from a sequence of {}",
                self.len()
            )));
        }
        Ok(Self {
            snapshots: self.snapshots[..k].to_vec(),
            node_count: self.node_count,
            id_map: self.id_map.clone(),
        })
    }

    /// Splits into a history of the first `history` snapshots and the one
    /// that follows it as the prediction target.
    pub fn history_and_target(&self, history: usize) -> Result<(Self, Snapshot)> {
        if history == 0 || history >= self.len() {
            return Err(Error::config(format!(
                "history of {history} snapshots needs a following target; sequence has {}",
                self.len()
            )));
        }
        let hist = self.prefix(history)?;
        Ok((hist, self.snapshots[history].clone()))
    }

    pub fn binarized(&self) -> Self {
        Self {
            snapshots: self.snapshots.iter().map(Snapshot::binarized).collect(),
            node_count: self.node_count,
            id_map: self.id_map.clone(),
        }
    }

    /// Weight-summed union of all snapshots.
    pub fn aggregate(&self) -> Snapshot {
        let edges = self.snapshots.iter().flat_map(|s| s.edges().collect::<Vec<_>>());
        Snapshot::from_edges(0, self.node_count, self.is_directed(), edges)
            .expect("edges of valid snapshots are valid")
    }

    /// Nodes with at least one incident edge somewhere in the sequence.
    pub fn active_nodes(&self) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        for s in &self.snapshots {
            for (v, list) in s.adjacency().iter().enumerate() {
                if !list.is_empty() {
                    seen[v] = true;
                }
                for &(u, _) in list {
                    seen[u] = true;
                }
            }
        }
        seen
    }
}

/// Bins events into `num_snapshots` equal-width windows over
/// `[t_min, t_max]`. Windows are half-open except the last, which is closed.
pub fn partition_snapshots(
    events: &[EdgeEvent],
    node_count: usize,
    num_snapshots: usize,
    directed: bool,
    id_map: IdMap,
) -> Result<SnapshotSequence> {
    if num_snapshots == 0 {
        return Err(Error::config("snapshot count must be at least 1"));
    }
    if events.is_empty() {
        return Err(Error::config("cannot partition an empty event list"));
    }
    let t_min = events.iter().map(|e| e.time).fold(f64::INFINITY, f64::min);
    let t_max = events.iter().map(|e| e.time).fold(f64::NEG_INFINITY, f64::max);
    let range = t_max - t_min;

    let mut buckets: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); num_snapshots];
    for e in events {
        let k = if range > 0.0 {
            let pos = ((e.time - t_min) / range * num_snapshots as f64).floor();
            (pos as usize).min(num_snapshots - 1)
        } else {
            0
        };
        buckets[k].push((e.src, e.dst, e.weight));
    }

    let mut snapshots = Vec::with_capacity(num_snapshots);
    for (k, bucket) in buckets.into_iter().enumerate() {
        let s = Snapshot::from_edges(k + 1, node_count, directed, bucket)?;
        if s.is_empty() {
            warn!("snapshot {} of {num_snapshots} has no edges", k + 1);
        }
        snapshots.push(s);
    }
    SnapshotSequence::new(snapshots, node_count, id_map)
}
