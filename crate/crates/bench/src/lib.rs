//! Benchmark fixtures for the engine and pipeline.

use ensat_core::model::init_params;
use ensat_core::synth::{gen_periodic, SynthConfig};
use ensat_core::{ModelConfig, ParameterSet, SnapshotSequence};

/// A periodic synthetic history with `nodes` nodes and `steps` snapshots.
pub fn history(nodes: usize, steps: usize) -> SnapshotSequence {
    let cfg = SynthConfig {
        num_nodes: nodes,
        steps,
        seed: 1,
        ..SynthConfig::default()
    };
    gen_periodic(&cfg).expect("valid synthetic config").history
}

/// Freshly initialized parameters for `history`.
pub fn params(config: &ModelConfig, history: &SnapshotSequence) -> ParameterSet {
    init_params(config, history.node_count(), history.len(), 1).expect("valid model config")
}
