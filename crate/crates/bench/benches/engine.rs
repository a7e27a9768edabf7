use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use ensat_bench::{history, params};
use ensat_core::diagnostics::op_checks;
use ensat_core::model::{forward, model_forward, GraphInputs};
use ensat_core::sampling::sample_batch;
use ensat_core::training::{sample_batches, walk_loss};
use ensat_core::{ModelConfig, Tape, WalkConfig};

fn forward_pass(c: &mut Criterion) {
    let mut group = c.benchmark_group("forward");
    for nodes in [20, 40, 80] {
        let seq = history(nodes, 6);
        let config = ModelConfig::with_dim(64, 8);
        let p = params(&config, &seq);
        group.bench_with_input(BenchmarkId::from_parameter(nodes), &nodes, |b, _| {
            b.iter(|| model_forward(black_box(&seq), &p, &config).unwrap())
        });
    }
    group.finish();
}

fn loss_and_backward(c: &mut Criterion) {
    let seq = history(40, 6);
    let config = ModelConfig::with_dim(64, 8);
    let p = params(&config, &seq);
    let walk = WalkConfig::default();
    let batches = sample_batches(&seq, &walk, 1).unwrap();
    let inputs = GraphInputs::new(&seq);
    c.bench_function("walk_loss_backward/40", |b| {
        b.iter(|| {
            let mut tape = Tape::new();
            let bound = p.bind(&mut tape);
            let out = forward(&mut tape, &inputs, &bound, &config).unwrap();
            let loss = walk_loss(&mut tape, out.z, &batches, 0.01, None).unwrap();
            black_box(tape.backward(loss).unwrap())
        })
    });
}

fn sampling(c: &mut Criterion) {
    let seq = history(80, 2);
    let walk = WalkConfig::default();
    c.bench_function("sample_batch/80", |b| {
        b.iter(|| sample_batch(black_box(seq.snapshot(0)), &walk, 3).unwrap())
    });
}

fn gradcheck(c: &mut Criterion) {
    let mut group = c.benchmark_group("gradcheck");
    group.sample_size(10);
    group.bench_function("ops", |b| b.iter(|| op_checks(black_box(0), 2).unwrap()));
    group.finish();
}

criterion_group!(benches, forward_pass, loss_and_backward, sampling, gradcheck);
criterion_main!(benches);
