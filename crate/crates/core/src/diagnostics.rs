//! Finite-difference gradient checks for every tensor primitive and for the
//! full model loss.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dyngraph::{IdMap, Snapshot, SnapshotSequence};
use crate::error::Result;
use crate::model::{forward, init_params, GraphInputs, MaskMode, ModelConfig};
use crate::rng::{derive_rng, Rng};
use crate::sampling::WalkConfig;
use crate::tensor::{finite_diff_check, BoundParams, ParameterSet, Tape, Tensor, Var, MASK_SENTINEL};
use crate::training::{sample_batches, walk_loss};

pub const OP_THRESHOLD: f64 = 1e-6;
pub const MODEL_THRESHOLD: f64 = 1e-4;
const EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub instances: usize,
    pub max_rel_error: f64,
    pub threshold: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_error < self.threshold
    }
}

fn uniform(rng: &mut Rng, shape: &[usize], lo: f64, hi: f64) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Values bounded away from zero, for ops with a kink there.
fn away_from_zero(rng: &mut Rng, shape: &[usize]) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let x: f64 = rng.random_range(0.05..2.0);
        if rng.random::<bool>() {
            x
        } else {
            -x
        }
    })
}

fn dim(rng: &mut Rng) -> usize {
    rng.random_range(1..5)
}

/// Reduces `out` to a scalar with fixed random weights, so every output
/// entry receives a distinct upstream gradient.
fn project(tape: &mut Tape, out: Var, rng: &mut Rng) -> Result<Var> {
    let shape = tape.shape(out).to_vec();
    let w = tape.constant(uniform(rng, &shape, -1.0, 1.0));
    let prod = tape.mul(out, w)?;
    Ok(tape.sum(prod))
}

type Build = dyn Fn(&mut Tape, &BoundParams) -> Result<Var>;

struct Case {
    params: ParameterSet,
    build: Box<Build>,
}

fn case(params: Vec<(&str, Tensor)>, build: impl Fn(&mut Tape, &BoundParams) -> Result<Var> + 'static) -> Case {
    let mut set = ParameterSet::new();
    for (name, t) in params {
        set.insert(name, t);
    }
    Case {
        params: set,
        build: Box::new(build),
    }
}

/// Wraps a builder so the output is projected with weights drawn from `seed`.
fn projected(
    seed: u64,
    f: impl Fn(&mut Tape, &BoundParams) -> Result<Var> + 'static,
) -> impl Fn(&mut Tape, &BoundParams) -> Result<Var> + 'static {
    move |tape, p| {
        let out = f(tape, p)?;
        let mut rng = derive_rng(seed, "project", 0);
        project(tape, out, &mut rng)
    }
}

fn make_case(op: &str, rng: &mut Rng, seed: u64) -> Case {
    let (m, k, n, b) = (dim(rng), dim(rng), dim(rng), dim(rng));
    match op {
        "matmul" => case(
            vec![("a", uniform(rng, &[m, k], -1.0, 1.0)), ("b", uniform(rng, &[k, n], -1.0, 1.0))],
            projected(seed, |t, p| t.matmul(p.get("a")?, p.get("b")?)),
        ),
        "matmul_shared" => case(
            vec![("a", uniform(rng, &[b, m, k], -1.0, 1.0)), ("b", uniform(rng, &[k, n], -1.0, 1.0))],
            projected(seed, |t, p| t.matmul(p.get("a")?, p.get("b")?)),
        ),
        "matmul_batched" => case(
            vec![("a", uniform(rng, &[b, m, k], -1.0, 1.0)), ("b", uniform(rng, &[b, k, n], -1.0, 1.0))],
            projected(seed, |t, p| t.matmul(p.get("a")?, p.get("b")?)),
        ),
        "add" => case(
            vec![("a", uniform(rng, &[b, m, n], -1.0, 1.0)), ("b", uniform(rng, &[m, 1], -1.0, 1.0))],
            projected(seed, |t, p| t.add(p.get("a")?, p.get("b")?)),
        ),
        "mul" => case(
            vec![("a", uniform(rng, &[b, m, n], -1.0, 1.0)), ("b", uniform(rng, &[1, n], -1.0, 1.0))],
            projected(seed, |t, p| t.mul(p.get("a")?, p.get("b")?)),
        ),
        "scale" => case(
            vec![("a", uniform(rng, &[m, n], -1.0, 1.0))],
            projected(seed, |t, p| Ok(t.scale(p.get("a")?, -1.7))),
        ),
        "expand" => case(
            vec![("a", uniform(rng, &[m, n], -1.0, 1.0))],
            projected(seed, move |t, p| t.expand(p.get("a")?, &[b, m, n])),
        ),
        "concat" => case(
            vec![("a", uniform(rng, &[m, k], -1.0, 1.0)), ("b", uniform(rng, &[m, n], -1.0, 1.0))],
            projected(seed, |t, p| t.concat_last(&[p.get("a")?, p.get("b")?])),
        ),
        "slice" => {
            let start = rng.random_range(0..k);
            let len = rng.random_range(1..=k + n - start);
            case(
                vec![("a", uniform(rng, &[m, k + n], -1.0, 1.0))],
                projected(seed, move |t, p| t.slice_last(p.get("a")?, start, len)),
            )
        }
        "permute" => case(
            vec![("a", uniform(rng, &[b, m, n], -1.0, 1.0))],
            projected(seed, |t, p| t.permute(p.get("a")?, &[1, 0, 2])),
        ),
        "transpose" => case(
            vec![("a", uniform(rng, &[b, m, n], -1.0, 1.0))],
            projected(seed, |t, p| t.transpose(p.get("a")?)),
        ),
        "reshape" => case(
            vec![("a", uniform(rng, &[b, m, n], -1.0, 1.0))],
            projected(seed, move |t, p| t.reshape(p.get("a")?, &[b * m, n])),
        ),
        "sigmoid" => case(
            vec![("a", uniform(rng, &[m, n], -3.0, 3.0))],
            projected(seed, |t, p| Ok(t.sigmoid(p.get("a")?))),
        ),
        "leaky_relu" => case(
            vec![("a", away_from_zero(rng, &[m, n]))],
            projected(seed, |t, p| Ok(t.leaky_relu(p.get("a")?, 0.2))),
        ),
        "elu" => case(
            vec![("a", away_from_zero(rng, &[m, n]))],
            projected(seed, |t, p| Ok(t.elu(p.get("a")?))),
        ),
        "log" => case(
            vec![("a", uniform(rng, &[m, n], 0.2, 3.0))],
            projected(seed, |t, p| Ok(t.log_clamped(p.get("a")?, 1e-12, 1e12))),
        ),
        "sum" => case(vec![("a", uniform(rng, &[m, n], -1.0, 1.0))], |t, p| {
            let s = t.sum(p.get("a")?);
            Ok(t.scale(s, 0.7))
        }),
        "mean" => case(vec![("a", uniform(rng, &[m, n], -1.0, 1.0))], |t, p| {
            let s = t.mean(p.get("a")?);
            Ok(t.scale(s, 0.7))
        }),
        "row_dot" => case(
            vec![("a", uniform(rng, &[m, n], -1.0, 1.0)), ("b", uniform(rng, &[m, n], -1.0, 1.0))],
            projected(seed, |t, p| t.row_dot(p.get("a")?, p.get("b")?)),
        ),
        "inner_product" => case(
            vec![("a", uniform(rng, &[n], -1.0, 1.0)), ("b", uniform(rng, &[n], -1.0, 1.0))],
            projected(seed, |t, p| t.inner_product(p.get("a")?, p.get("b")?)),
        ),
        "gather" => {
            let index: Vec<usize> = (0..m + 2).map(|_| rng.random_range(0..k)).collect();
            case(
                vec![("a", uniform(rng, &[k, n], -1.0, 1.0))],
                projected(seed, move |t, p| t.gather_rows(p.get("a")?, &index)),
            )
        }
        "softmax" => case(
            vec![("a", uniform(rng, &[b, m, n], -2.0, 2.0))],
            projected(seed, |t, p| t.softmax(p.get("a")?)),
        ),
        "masked_softmax" => {
            let width = n + 1;
            let mask = Tensor::from_fn(&[m, width], |i| {
                // first entry of each row stays open
                if i % width == 0 || rng.random::<bool>() {
                    0.0
                } else {
                    MASK_SENTINEL
                }
            });
            case(
                vec![("a", uniform(rng, &[b, m, width], -2.0, 2.0))],
                projected(seed, move |t, p| t.masked_softmax(p.get("a")?, Some(&mask))),
            )
        }
        other => unreachable!("unknown op {other}"),
    }
}

pub const OPS: [&str; 23] = [
    "matmul",
    "matmul_shared",
    "matmul_batched",
    "add",
    "mul",
    "scale",
    "expand",
    "concat",
    "slice",
    "permute",
    "transpose",
    "reshape",
    "sigmoid",
    "leaky_relu",
    "elu",
    "log",
    "sum",
    "mean",
    "row_dot",
    "inner_product",
    "gather",
    "softmax",
    "masked_softmax",
];

/// Checks each primitive on `instances` random inputs.
pub fn op_checks(seed: u64, instances: usize) -> Result<Vec<CheckResult>> {
    let mut results = Vec::new();
    for (i, op) in OPS.iter().enumerate() {
        let mut worst: f64 = 0.0;
        for j in 0..instances {
            let case_seed = crate::rng::derive_seed(seed, op, j as u64);
            let mut rng = derive_rng(case_seed, "case", i as u64);
            let c = make_case(op, &mut rng, case_seed);
            let report = finite_diff_check(&c.params, EPS, |t, p| (c.build)(t, p))?;
            worst = worst.max(report.max_rel_error);
        }
        results.push(CheckResult {
            name: (*op).to_string(),
            instances,
            max_rel_error: worst,
            threshold: OP_THRESHOLD,
        });
    }
    Ok(results)
}

/// Random undirected sequence with `n` nodes and `steps` snapshots.
pub fn random_sequence(rng: &mut Rng, n: usize, steps: usize, density: f64) -> Result<SnapshotSequence> {
    let mut snaps = Vec::with_capacity(steps);
    for t in 0..steps {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if rng.random::<f64>() < density {
                    edges.push((u, v, rng.random_range(0.5..2.0)));
                }
            }
        }
        snaps.push(Snapshot::from_edges(t + 1, n, false, edges)?);
    }
    SnapshotSequence::new(snaps, n, IdMap::identity(n))
}

/// Checks the walk loss through the full model on one random instance.
pub fn model_check(seed: u64, nodes: usize, steps: usize, dim: usize, heads: usize, mask: MaskMode) -> Result<CheckResult> {
    let mut rng = derive_rng(seed, "model-check", 0);
    let seq = random_sequence(&mut rng, nodes, steps, 0.3)?;
    let mut config = ModelConfig::with_dim(dim, heads);
    config.mask = mask;
    let mut params = init_params(&config, nodes, steps, seed)?;
    // non-zero position offsets so their gradient path is exercised
    if let Some(p) = params.get_mut("temporal.pos") {
        for x in p.data_mut() {
            *x = rng.random_range(-0.5..0.5);
        }
    }
    let walk = WalkConfig {
        walk_length: 6,
        walks_per_node: 2,
        context_window: 2,
        negatives_per_positive: 2,
        seed: 0,
    };
    let batches = sample_batches(&seq, &walk, seed)?;
    let inputs = GraphInputs::new(&seq);
    let report = finite_diff_check(&params, EPS, |tape, bound| {
        let out = forward(tape, &inputs, bound, &config)?;
        let loss = walk_loss(tape, out.z, &batches, 0.5, None)?;
        // keep the magnitude moderate
        Ok(tape.scale(loss, 0.01))
    })?;
    Ok(CheckResult {
        name: format!("model[{mask}]"),
        instances: 1,
        max_rel_error: report.max_rel_error,
        threshold: MODEL_THRESHOLD,
    })
}

/// Every primitive on 20 random instances plus the full model loss with
/// `N = 10, T = 3, d = 8, heads = 2`.
pub fn gradcheck_suite(seed: u64, mask: MaskMode) -> Result<Vec<CheckResult>> {
    let mut results = op_checks(seed, 20)?;
    results.push(model_check(seed, 10, 3, 8, 2, mask)?);
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primitive_checks_pass() {
        for r in op_checks(3, 4).unwrap() {
            assert!(r.passed(), "{r:?}");
        }
    }
}
