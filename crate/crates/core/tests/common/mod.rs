#![allow(dead_code)]

use rand::Rng as _;

use ensat_core::diagnostics::random_sequence;
use ensat_core::model::{init_params, names};
use ensat_core::rng::{derive_rng, Rng};
use ensat_core::{IdMap, ModelConfig, ParameterSet, Snapshot, SnapshotSequence, Tensor};

/// Small model with every block active.
pub fn small_config(dim: usize, heads: usize) -> ModelConfig {
    ModelConfig::with_dim(dim, heads)
}

/// Parameters with non-zero position offsets so the temporal block sees them.
pub fn random_params(config: &ModelConfig, n: usize, steps: usize, seed: u64) -> ParameterSet {
    let mut params = init_params(config, n, steps, seed).unwrap();
    let mut rng = derive_rng(seed, "test.pos", 0);
    if let Some(pos) = params.get_mut(names::POSITION) {
        for x in pos.data_mut() {
            *x = rng.random_range(-0.5..0.5);
        }
    }
    params
}

pub fn random_instance(rng: &mut Rng, max_n: usize, max_t: usize) -> SnapshotSequence {
    let n = rng.random_range(2..=max_n);
    let t = rng.random_range(1..=max_t);
    let density = rng.random_range(0.1..0.6);
    random_sequence(rng, n, t, density).unwrap()
}

/// Relabels nodes: old node `v` becomes `perm[v]`.
pub fn relabel(seq: &SnapshotSequence, perm: &[usize]) -> SnapshotSequence {
    let n = seq.node_count();
    let snaps = seq
        .snapshots()
        .iter()
        .map(|s| {
            Snapshot::from_edges(s.index, n, s.is_directed(), s.edges().map(|(u, v, w)| (perm[u], perm[v], w)))
                .unwrap()
        })
        .collect();
    SnapshotSequence::new(snaps, n, IdMap::identity(n)).unwrap()
}

pub fn sequence(n: usize, snapshots: &[&[(usize, usize)]]) -> SnapshotSequence {
    let snaps = snapshots
        .iter()
        .enumerate()
        .map(|(k, edges)| Snapshot::from_edges(k + 1, n, false, edges.iter().map(|&(u, v)| (u, v, 1.0))).unwrap())
        .collect();
    SnapshotSequence::new(snaps, n, IdMap::identity(n)).unwrap()
}

pub fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        x.exp_m1()
    }
}

pub fn tensor(shape: &[usize], data: Vec<f64>) -> Tensor {
    Tensor::new(shape.to_vec(), data).unwrap()
}
