//! Unsupervised training signal: random-walk co-occurrence positives and
//! degree-based negative samples, per snapshot.

use std::collections::BTreeMap;

use rand::Rng as _;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dyngraph::{node_degrees, Snapshot};
use crate::error::{Error, Result};
use crate::rng::{derive_rng, derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub context_window: usize,
    /// Negative draws per positive pair.
    pub negatives_per_positive: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            walk_length: 40,
            walks_per_node: 10,
            context_window: 10,
            negatives_per_positive: 10,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length < 2 {
            return Err(Error::config("walk_length must be at least 2"));
        }
        if self.walks_per_node == 0 {
            return Err(Error::config("walks_per_node must be positive"));
        }
        if self.context_window == 0 || self.context_window >= self.walk_length {
            return Err(Error::config("context_window must be in [1, walk_length)"));
        }
        if self.negatives_per_positive == 0 {
            return Err(Error::config("negatives_per_positive must be positive"));
        }
        Ok(())
    }
}

/// Training pairs of one snapshot, aggregated by multiplicity.
///
/// `positives` holds `(v, u, count)` for co-occurring nodes; `negatives`
/// holds `(v, u', count)` for negative draws attached to anchor `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    /// 1-based snapshot index.
    pub snapshot: usize,
    pub positives: Vec<(usize, usize, f64)>,
    pub negatives: Vec<(usize, usize, f64)>,
}

impl PairBatch {
    pub fn num_positives(&self) -> f64 {
        self.positives.iter().map(|p| p.2).sum()
    }

    pub fn num_negatives(&self) -> f64 {
        self.negatives.iter().map(|p| p.2).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.positives.is_empty() && self.negatives.is_empty()
    }

    /// Text dump: `t v u` per positive and `t v u NEG` per negative, one
    /// line per occurrence.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for &(v, u, c) in &self.positives {
            for _ in 0..c as usize {
                out.push_str(&format!("{} {v} {u}\n", self.snapshot));
            }
        }
        for &(v, u, c) in &self.negatives {
            for _ in 0..c as usize {
                out.push_str(&format!("{} {v} {u} NEG\n", self.snapshot));
            }
        }
        out
    }
}

fn step(rng: &mut Rng, neighbors: &[(usize, f64)]) -> usize {
    let total: f64 = neighbors.iter().map(|&(_, w)| w).sum();
    let mut x = rng.random::<f64>() * total;
    for &(u, w) in neighbors {
        if x < w {
            return u;
        }
        x -= w;
    }
    neighbors[neighbors.len() - 1].0
}

/// `walks_per_node` weighted walks of up to `walk_length` nodes from every
/// node with at least one neighbor, ordered by start node. Each start node
/// draws from its own stream derived from `(seed, node)`.
pub fn random_walks(snapshot: &Snapshot, cfg: &WalkConfig) -> Vec<Vec<usize>> {
    let mut walks = Vec::new();
    for start in 0..snapshot.node_count() {
        if snapshot.neighbors(start).is_empty() {
            continue;
        }
        let mut rng = derive_rng(cfg.seed, "walk", start as u64);
        for _ in 0..cfg.walks_per_node {
            let mut walk = Vec::with_capacity(cfg.walk_length);
            walk.push(start);
            let mut cur = start;
            while walk.len() < cfg.walk_length {
                let nbrs = snapshot.neighbors(cur);
                if nbrs.is_empty() {
                    break;
                }
                cur = step(&mut rng, nbrs);
                walk.push(cur);
            }
            walks.push(walk);
        }
    }
    walks
}

/// Ordered pairs `(walk[i], walk[j])` with `0 < |i - j| <= window`, self
/// pairs dropped, duplicates kept.
pub fn cooccurrence_pairs(walks: &[Vec<usize>], window: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for walk in walks {
        for i in 0..walk.len() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(walk.len() - 1);
            for j in lo..=hi {
                if j != i && walk[i] != walk[j] {
                    pairs.push((walk[i], walk[j]));
                }
            }
        }
    }
    pairs
}

/// `P(v) ∝ degree(v)^0.75`, zero for isolated nodes.
pub fn negative_distribution(snapshot: &Snapshot) -> Result<Vec<f64>> {
    degree_power(&node_degrees(snapshot))
        .ok_or_else(|| Error::NoSignal(format!("snapshot {} has no edges", snapshot.index)))
}

fn degree_power(degrees: &[f64]) -> Option<Vec<f64>> {
    let powered: Vec<f64> = degrees.iter().map(|d| d.powf(0.75)).collect();
    let total: f64 = powered.iter().sum();
    (total > 0.0).then(|| powered.into_iter().map(|p| p / total).collect())
}

fn cumulative(dist: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    dist.iter()
        .map(|&p| {
            acc += p;
            acc
        })
        .collect()
}

fn inverse_cdf(cdf: &[f64], x: f64) -> usize {
    let total = cdf[cdf.len() - 1];
    let i = cdf.partition_point(|&c| c <= x * total);
    if i < cdf.len() {
        i
    } else {
        cdf.partition_point(|&c| c < total)
    }
}

/// `count` i.i.d. draws from `dist` by inverse CDF.
pub fn sample_negatives(dist: &[f64], count: usize, seed: u64) -> Vec<usize> {
    let cdf = cumulative(dist);
    let mut rng = rng_from_seed(seed);
    (0..count).map(|_| inverse_cdf(&cdf, rng.random::<f64>())).collect()
}

/// Counts of a multinomial draw with `trials` trials over `dist`, via
/// successive conditional binomials.
fn multinomial(rng: &mut Rng, trials: u64, dist: &[f64]) -> Vec<u64> {
    let mut counts = vec![0; dist.len()];
    let mut left = trials;
    let mut mass = 1.0;
    for (i, &p) in dist.iter().enumerate() {
        if left == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = if q >= 1.0 {
            left
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        counts[i] = k;
        left -= k;
        mass -= p;
    }
    if left > 0 {
        // rounding residue goes to the last supported entry
        let last = dist.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        counts[last] += left;
    }
    counts
}

/// Positives and negatives for one snapshot.
///
/// Each anchor `v` with `c_v` positive occurrences receives
/// `negatives_per_positive · c_v` negative draws from the snapshot's
/// negative distribution. Draws are aggregated into counts; the law of the
/// counts equals that of the individual i.i.d. draws.
pub fn sample_batch(snapshot: &Snapshot, cfg: &WalkConfig, seed: u64) -> Result<PairBatch> {
    cfg.validate()?;
    let dist = negative_distribution(snapshot)?;
    let walk_cfg = WalkConfig {
        seed: derive_seed(seed, "walks", snapshot.index as u64),
        ..cfg.clone()
    };
    let walks = random_walks(snapshot, &walk_cfg);
    let mut positive_counts: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    for pair in cooccurrence_pairs(&walks, cfg.context_window) {
        *positive_counts.entry(pair).or_insert(0.0) += 1.0;
    }
    let mut per_anchor: BTreeMap<usize, u64> = BTreeMap::new();
    for (&(v, _), &c) in &positive_counts {
        *per_anchor.entry(v).or_insert(0) += c as u64;
    }
    let mut negatives = Vec::new();
    for (&v, &c) in &per_anchor {
        let mut rng = derive_rng(seed, &format!("negatives.{}", snapshot.index), v as u64);
        let counts = multinomial(&mut rng, c * cfg.negatives_per_positive as u64, &dist);
        for (u, &k) in counts.iter().enumerate() {
            if k > 0 {
                negatives.push((v, u, k as f64));
            }
        }
    }
    Ok(PairBatch {
        snapshot: snapshot.index,
        positives: positive_counts.into_iter().map(|((v, u), c)| (v, u, c)).collect(),
        negatives,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn snap(n: usize, edges: &[(usize, usize)]) -> Snapshot {
        Snapshot::from_edges(1, n, false, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap()
    }

    #[test]
    fn isolated_nodes_start_no_walks() {
        let s = snap(3, &[(0, 1)]);
        let walks = random_walks(&s, &WalkConfig::default());
        assert_eq!(walks.len(), 20);
        assert!(walks.iter().all(|w| w[0] != 2));
    }

    #[test]
    fn two_node_walk_alternates() {
        let s = snap(2, &[(0, 1)]);
        for w in random_walks(&s, &WalkConfig::default()) {
            assert_eq!(w.len(), 40);
            for pair in w.windows(2) {
                assert_ne!(pair[0], pair[1]);
            }
        }
    }

    #[test]
    fn star_leaves_visited_uniformly() {
        let s = snap(4, &[(0, 1), (0, 2), (0, 3)]);
        let mut rng = rng_from_seed(5);
        let mut hits = [0usize; 4];
        for _ in 0..10_000 {
            hits[step(&mut rng, s.neighbors(0))] += 1;
        }
        for &h in &hits[1..] {
            assert!((h as f64 / 1e4 - 1.0 / 3.0).abs() < 0.02, "{hits:?}");
        }
    }

    #[test]
    fn window_pairs() {
        let p = cooccurrence_pairs(&[vec![0, 1, 2]], 1);
        assert_eq!(p, vec![(0, 1), (1, 0), (1, 2), (2, 1)]);
        let p = cooccurrence_pairs(&[vec![0, 1, 0]], 2);
        assert!(!p.contains(&(0, 0)));
        let p = cooccurrence_pairs(&[vec![0, 1, 2, 3, 4]], 10);
        assert_eq!(p.len(), 20);
    }

    #[test]
    fn negative_distribution_examples() {
        let d = degree_power(&[1.0, 16.0]).unwrap();
        assert!((d[0] - 1.0 / 9.0).abs() < 1e-12);
        assert!((d[1] - 8.0 / 9.0).abs() < 1e-12);
        assert_eq!(degree_power(&[0.0, 5.0]).unwrap(), vec![0.0, 1.0]);
        let d = negative_distribution(&snap(4, &[(0, 1), (1, 2), (2, 3), (3, 0)])).unwrap();
        assert!(d.iter().all(|&p| (p - 0.25).abs() < 1e-15));

        let d = negative_distribution(&snap(3, &[(1, 2)])).unwrap();
        assert_eq!(d, vec![0.0, 0.5, 0.5]);
        assert!(negative_distribution(&snap(3, &[])).is_err());
    }

    #[test]
    fn negatives_follow_distribution() {
        assert!(sample_negatives(&[1.0, 0.0], 100, 3).iter().all(|&u| u == 0));
        assert!(sample_negatives(&[0.0, 1.0], 100, 3).iter().all(|&u| u == 1));
        let draws = sample_negatives(&[0.5, 0.5], 10_000, 3);
        let zeros = draws.iter().filter(|&&u| u == 0).count() as f64 / 1e4;
        assert!((zeros - 0.5).abs() < 0.02);
        assert_eq!(draws, sample_negatives(&[0.5, 0.5], 10_000, 3));
    }

    #[test]
    fn multinomial_preserves_trials_and_support() {
        let mut rng = rng_from_seed(1);
        let dist = [0.2, 0.0, 0.5, 0.3];
        let c = multinomial(&mut rng, 1000, &dist);
        assert_eq!(c.iter().sum::<u64>(), 1000);
        assert_eq!(c[1], 0);
    }

    #[test]
    fn batch_is_reproducible_and_in_range() {
        let s = snap(6, &[(0, 1), (1, 2), (2, 3), (4, 5)]);
        let cfg = WalkConfig {
            walk_length: 8,
            walks_per_node: 2,
            context_window: 2,
            negatives_per_positive: 3,
            seed: 0,
        };
        let a = sample_batch(&s, &cfg, 9).unwrap();
        assert_eq!(a, sample_batch(&s, &cfg, 9).unwrap());
        assert!((a.num_negatives() - 3.0 * a.num_positives()).abs() < 1e-9);
        for &(v, u, _) in a.positives.iter().chain(&a.negatives) {
            assert!(v < 6 && u < 6);
        }
    }
}
