use crate::dyngraph::SnapshotSequence;
use crate::error::{Error, Result};
use crate::tensor::{BoundParams, ParameterSet, Tape, Tensor, Var};

use super::layers::{global_attention, local_attention, temporal_attention};
use super::names;
use super::{GraphInputs, ModelConfig, Variant};

/// Attention distributions recorded during a forward pass, one entry per
/// head. Local and global entries are `[T, N, N]`, temporal ones `[N, T, T]`.
#[derive(Debug, Clone, Default)]
pub struct ForwardTrace {
    pub local: Vec<Var>,
    pub global: Vec<Var>,
    pub temporal: Vec<Var>,
}

#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[N, T, F]` embeddings.
    pub z: Var,
    pub trace: ForwardTrace,
}

/// Records the full model on `tape`.
pub fn forward(
    tape: &mut Tape,
    inputs: &GraphInputs,
    params: &BoundParams,
    config: &ModelConfig,
) -> Result<ForwardOutput> {
    config.validate()?;
    let n = inputs.num_nodes;
    let steps = inputs.num_snapshots;
    let mut trace = ForwardTrace::default();

    let features = if config.one_hot {
        tape.constant(Tensor::identity(n))
    } else {
        let x = params.get(names::EMBED)?;
        if tape.shape(x)[0] != n {
            return Err(Error::config(format!(
                "parameters cover {} nodes, input has {n}",
                tape.shape(x)[0]
            )));
        }
        x
    };

    let local = match config.variant {
        Variant::NoLocal => {
            let proj = tape.matmul(features, params.get(names::LOCAL_PROJ)?)?;
            tape.expand(proj, &[steps, n, config.local_dim])?
        }
        _ => local_attention(tape, features, inputs, params, config, &mut trace.local)?,
    };

    let global = match config.variant {
        Variant::NoGlobal => local,
        _ => global_attention(tape, local, params, config, &mut trace.global)?,
    };

    let per_node = tape.permute(global, &[1, 0, 2])?;
    let z = match config.variant {
        Variant::NoTemporal => per_node,
        _ => {
            let input = if config.use_position_embedding {
                let mut pos = params.get(names::POSITION)?;
                let rows = tape.shape(pos)[0];
                if rows < steps {
                    return Err(Error::config(format!(
                        "position table has {rows} steps, input has {steps}"
                    )));
                }
                if rows > steps {
                    // a prefix of the sequence uses the leading rows
                    let index: Vec<usize> = (0..steps).collect();
                    pos = tape.gather_rows(pos, &index)?;
                }
                tape.add(per_node, pos)?
            } else {
                per_node
            };
            temporal_attention(tape, input, params, config, &mut trace.temporal)?
        }
    };
    Ok(ForwardOutput { z, trace })
}

/// Embeddings for every node and step, computed without recording gradients
/// for later use.
pub fn model_forward(
    seq: &SnapshotSequence,
    params: &ParameterSet,
    config: &ModelConfig,
) -> Result<EmbeddingCube> {
    let inputs = GraphInputs::new(seq);
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let out = forward(&mut tape, &inputs, &bound, config)?;
    EmbeddingCube::new(tape.value(out.z).clone())
}

/// `Z[v][t]`, the embedding of node `v` at step `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingCube {
    z: Tensor,
}

impl EmbeddingCube {
    pub fn new(z: Tensor) -> Result<Self> {
        if z.rank() != 3 {
            return Err(Error::invalid(format!("embedding cube must be rank 3, got {:?}", z.shape())));
        }
        Ok(Self { z })
    }

    pub fn num_nodes(&self) -> usize {
        self.z.shape()[0]
    }

    pub fn num_steps(&self) -> usize {
        self.z.shape()[1]
    }

    pub fn dim(&self) -> usize {
        self.z.shape()[2]
    }

    pub fn tensor(&self) -> &Tensor {
        &self.z
    }

    pub fn vector(&self, v: usize, t: usize) -> &[f64] {
        self.z.row(&[v, t])
    }

    /// `[N, F]` embeddings at step `t`.
    pub fn step(&self, t: usize) -> Tensor {
        let (n, f) = (self.num_nodes(), self.dim());
        let mut data = Vec::with_capacity(n * f);
        for v in 0..n {
            data.extend_from_slice(self.vector(v, t));
        }
        Tensor::new(vec![n, f], data).expect("shape")
    }

    /// Embeddings at the last step.
    pub fn last_step(&self) -> Tensor {
        self.step(self.num_steps() - 1)
    }
}
