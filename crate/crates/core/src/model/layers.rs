use crate::error::Result;
use crate::tensor::{BoundParams, Tape, Tensor, Var, MASK_SENTINEL};

use super::names;
use super::{GraphInputs, MaskMode, ModelConfig};

/// Neighbor-restricted multi-head attention applied to every snapshot.
///
/// For head `k` with projection `W` and attention vector `a = [a_src ‖ a_dst]`:
/// `e[v,u] = LeakyReLU(A[v,u] · (a_srcᵀ W h_v + a_dstᵀ W h_u))` over the
/// closed neighborhood of `v`, `α = softmax_u(e)`, output `ELU(Σ_u α[v,u] W h_u)`.
/// Heads are concatenated. `features` is `[N, D]`; the result is
/// `[T, N, local_dim]`. Attention distributions are appended to `trace`.
pub fn local_attention(
    tape: &mut Tape,
    features: Var,
    inputs: &GraphInputs,
    params: &BoundParams,
    config: &ModelConfig,
    trace: &mut Vec<Var>,
) -> Result<Var> {
    let n = inputs.num_nodes;
    let dh = config.local_dim / config.heads;
    let weights = tape.constant(inputs.weights.clone());
    let mut heads = Vec::with_capacity(config.heads);
    for h in 0..config.heads {
        let w = params.get(&names::local_w(h))?;
        let a = params.get(&names::local_a(h))?;
        let wh = tape.matmul(features, w)?;
        let a_src = tape.slice_last(a, 0, dh)?;
        let a_src = tape.reshape(a_src, &[dh, 1])?;
        let a_dst = tape.slice_last(a, dh, dh)?;
        let a_dst = tape.reshape(a_dst, &[dh, 1])?;
        let s_src = tape.matmul(wh, a_src)?;
        let s_dst = tape.matmul(wh, a_dst)?;
        let s_dst = tape.reshape(s_dst, &[1, n])?;
        let pair = tape.add(s_src, s_dst)?;
        let logits = tape.mul(weights, pair)?;
        let logits = tape.leaky_relu(logits, config.leaky_relu_slope);
        let alpha = tape.masked_softmax(logits, Some(&inputs.mask))?;
        trace.push(alpha);
        let agg = tape.matmul(alpha, wh)?;
        heads.push(tape.elu(agg));
    }
    tape.concat_last(&heads)
}

/// Unmasked scaled dot-product self-attention over all nodes of each
/// snapshot. `input` is `[T, N, D']`; the result is `[T, N, global_dim]`.
pub fn global_attention(
    tape: &mut Tape,
    input: Var,
    params: &BoundParams,
    config: &ModelConfig,
    trace: &mut Vec<Var>,
) -> Result<Var> {
    let dh = config.global_dim / config.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut heads = Vec::with_capacity(config.heads);
    for h in 0..config.heads {
        let q = tape.matmul(input, params.get(&names::global(h, "wq"))?)?;
        let k = tape.matmul(input, params.get(&names::global(h, "wk"))?)?;
        let v = tape.matmul(input, params.get(&names::global(h, "wv"))?)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, scale);
        let alpha = tape.softmax(scores)?;
        trace.push(alpha);
        heads.push(tape.matmul(alpha, v)?);
    }
    tape.concat_last(&heads)
}

/// Additive `[T, T]` mask over (query, key) steps.
pub fn temporal_mask(steps: usize, mode: MaskMode) -> Tensor {
    Tensor::from_fn(&[steps, steps], |idx| {
        let (i, j) = (idx / steps, idx % steps);
        let open = match mode {
            MaskMode::Causal => j <= i,
            MaskMode::Literal => i <= j,
        };
        if open {
            0.0
        } else {
            MASK_SENTINEL
        }
    })
}

/// Masked self-attention across each node's own steps. `input` is
/// `[N, T, F']` (position offsets already added); the result is
/// `[N, T, embed_dim]`.
pub fn temporal_attention(
    tape: &mut Tape,
    input: Var,
    params: &BoundParams,
    config: &ModelConfig,
    trace: &mut Vec<Var>,
) -> Result<Var> {
    let steps = tape.shape(input)[1];
    let dh = config.embed_dim / config.heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mask = temporal_mask(steps, config.mask);
    let mut heads = Vec::with_capacity(config.heads);
    for h in 0..config.heads {
        let q = tape.matmul(input, params.get(&names::temporal(h, "wq"))?)?;
        let k = tape.matmul(input, params.get(&names::temporal(h, "wk"))?)?;
        let v = tape.matmul(input, params.get(&names::temporal(h, "wv"))?)?;
        let kt = tape.transpose(k)?;
        let scores = tape.matmul(q, kt)?;
        let scores = tape.scale(scores, scale);
        let alpha = tape.masked_softmax(scores, Some(&mask))?;
        trace.push(alpha);
        heads.push(tape.matmul(alpha, v)?);
    }
    tape.concat_last(&heads)
}
