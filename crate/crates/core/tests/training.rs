mod common;

use common::*;
use ensat_core::diagnostics::{gradcheck_suite, model_check};
use ensat_core::model::{init_params, model_forward, read_checkpoint, write_checkpoint, Checkpoint, CheckpointMeta};
use ensat_core::rng::derive_rng;
use ensat_core::training::{bce_walk_loss, sample_batches, train};
use ensat_core::{MaskMode, ModelConfig, SnapshotSequence, TrainConfig, WalkConfig};

/// Two communities of 10 nodes, each a ring with chords, over `steps`
/// snapshots.
fn two_communities(steps: usize) -> SnapshotSequence {
    let mut edges = Vec::new();
    for c in 0..2 {
        let base = 10 * c;
        for i in 0..10 {
            edges.push((base + i, base + (i + 1) % 10));
            edges.push((base + i, base + (i + 3) % 10));
        }
    }
    edges.push((0, 10));
    let snaps: Vec<&[(usize, usize)]> = (0..steps).map(|_| edges.as_slice()).collect();
    sequence(20, &snaps)
}

fn quick_walk(seed: u64) -> WalkConfig {
    WalkConfig {
        walk_length: 10,
        walks_per_node: 2,
        context_window: 3,
        negatives_per_positive: 5,
        seed,
    }
}

fn quick_train(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        epochs,
        lr,
        patience: 1000,
        frozen_samples: true,
        ..TrainConfig::default()
    }
}

#[test]
fn training_loss_decreases_over_the_first_epochs() {
    let seq = two_communities(3);
    let (_, report) = train(&seq, &ModelConfig::with_dim(8, 2), &quick_walk(1), &quick_train(5, 1e-3)).unwrap();
    let losses = report.losses();
    assert_eq!(losses.len(), 5);
    for w in losses.windows(2) {
        assert!(w[1] < w[0], "{losses:?}");
    }
}

#[test]
fn zero_learning_rate_keeps_initial_parameters() {
    let seq = two_communities(3);
    let model = ModelConfig::with_dim(8, 2);
    let cfg = quick_train(3, 0.0);
    let (params, _) = train(&seq, &model, &quick_walk(1), &cfg).unwrap();
    let init = init_params(&model, 20, 3, cfg.seed).unwrap();
    assert!(params.bit_identical(&init));
}

#[test]
fn training_is_deterministic() {
    let seq = two_communities(3);
    let model = ModelConfig::with_dim(8, 2);
    let mut cfg = quick_train(4, 1e-2);
    cfg.frozen_samples = false;
    cfg.batch_size = 7;
    let (a, ra) = train(&seq, &model, &quick_walk(2), &cfg).unwrap();
    let (b, rb) = train(&seq, &model, &quick_walk(2), &cfg).unwrap();
    assert!(a.bit_identical(&b));
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    cfg.seed = 9;
    let (c, _) = train(&seq, &model, &quick_walk(2), &cfg).unwrap();
    assert!(!a.bit_identical(&c));
}

#[test]
fn report_serialization_omits_wall_time() {
    let seq = two_communities(3);
    let (_, report) = train(&seq, &ModelConfig::with_dim(4, 1), &quick_walk(1), &quick_train(1, 1e-3)).unwrap();
    let json = serde_json::to_string(&report).unwrap();
    assert!(!json.contains("wall_time"));
}

#[test]
fn single_snapshot_cannot_train() {
    let seq = two_communities(1);
    assert!(train(&seq, &ModelConfig::with_dim(4, 1), &quick_walk(1), &quick_train(1, 1e-3)).is_err());
}

#[test]
fn walk_loss_is_positive_and_finite_for_random_parameters() {
    let seq = two_communities(2);
    let model = ModelConfig::with_dim(8, 2);
    let params = random_params(&model, 20, 2, 4);
    let z = model_forward(&seq, &params, &model).unwrap();
    let batches = sample_batches(&seq, &quick_walk(3), 3).unwrap();
    let loss = bce_walk_loss(z.tensor(), &batches, 0.01).unwrap();
    assert!(loss.is_finite() && loss > 0.0);
}

#[test]
fn full_model_gradients_match_finite_differences() {
    for (seed, n, t) in [(1, 8, 2), (2, 6, 3), (3, 10, 4)] {
        for mask in [MaskMode::Causal, MaskMode::Literal] {
            let r = model_check(seed, n, t, 8, 2, mask).unwrap();
            assert!(r.passed(), "{r:?}");
        }
    }
}

#[test]
fn gradcheck_suite_passes_in_both_mask_modes() {
    for mask in [MaskMode::Causal, MaskMode::Literal] {
        for r in gradcheck_suite(0, mask).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}

#[test]
fn checkpoint_reproduces_embeddings_bit_exactly() {
    let mut rng = derive_rng(21, "ckpt", 0);
    let seq = random_instance(&mut rng, 10, 3);
    let model = ModelConfig::default();
    let params = random_params(&model, seq.node_count(), seq.len(), 8);
    let before = model_forward(&seq, &params, &model).unwrap();
    let checkpoint = Checkpoint {
        meta: CheckpointMeta {
            model: model.clone(),
            num_nodes: seq.node_count(),
            num_snapshots: seq.len(),
            extra: serde_json::Value::Null,
        },
        params,
    };
    let mut bytes = Vec::new();
    write_checkpoint(&checkpoint, &mut bytes).unwrap();
    let loaded = read_checkpoint(&bytes[..]).unwrap();
    let after = model_forward(&seq, &loaded.params, &loaded.meta.model).unwrap();
    let same = before
        .tensor()
        .data()
        .iter()
        .zip(after.tensor().data())
        .all(|(a, b)| a.to_bits() == b.to_bits());
    assert!(same);

    let len = bytes.len();
    for cut in [1, 7, len / 3, len - 1] {
        assert!(read_checkpoint(&bytes[..cut]).is_err());
    }
    let mut extended = bytes.clone();
    extended.push(0);
    assert!(read_checkpoint(&extended[..]).is_err());
    let mut bad = bytes;
    bad[0] ^= 0xff;
    assert!(read_checkpoint(&bad[..]).is_err());
}
