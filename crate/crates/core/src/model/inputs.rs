use crate::dyngraph::SnapshotSequence;
use crate::tensor::{Tensor, MASK_SENTINEL};

/// Dense per-snapshot tensors consumed by the local layer.
///
/// `weights[t, v, u]` holds the link weight of `(v, u)` in snapshot `t`, with
/// a unit self-loop on the diagonal; `mask[t, v, u]` is `0` over the closed
/// neighborhood of `v` and the mask sentinel elsewhere.
#[derive(Debug, Clone)]
pub struct GraphInputs {
    pub num_nodes: usize,
    pub num_snapshots: usize,
    pub weights: Tensor,
    pub mask: Tensor,
}

impl GraphInputs {
    pub fn new(seq: &SnapshotSequence) -> Self {
        let n = seq.node_count();
        let t = seq.len();
        let mut weights = vec![0.0; t * n * n];
        let mut mask = vec![MASK_SENTINEL; t * n * n];
        for (k, snapshot) in seq.snapshots().iter().enumerate() {
            let base = k * n * n;
            for v in 0..n {
                weights[base + v * n + v] = 1.0;
                mask[base + v * n + v] = 0.0;
                for &(u, w) in snapshot.neighbors(v) {
                    weights[base + v * n + u] = w;
                    mask[base + v * n + u] = 0.0;
                }
            }
        }
        Self {
            num_nodes: n,
            num_snapshots: t,
            weights: Tensor::new(vec![t, n, n], weights).expect("shape"),
            mask: Tensor::new(vec![t, n, n], mask).expect("shape"),
        }
    }
}
