use crate::error::{Error, Result};

use super::kernels::{broadcast_map, broadcast_shape, gemm, gemm_a_bt, gemm_at_b, permute_map};
use super::Tensor;

/// Finite stand-in for `-inf` in additive attention masks.
pub const MASK_SENTINEL: f64 = -1e30;

fn is_masked(m: f64) -> bool {
    m <= MASK_SENTINEL * 0.5
}

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn id(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Expand(Var),
    Concat(Vec<Var>),
    Slice { input: Var, start: usize, len: usize },
    Permute { input: Var, map: Vec<usize> },
    Reshape(Var),
    Sigmoid(Var),
    LeakyRelu(Var, f64),
    Elu(Var),
    Log { input: Var, lo: f64, hi: f64 },
    Sum(Var),
    Mean(Var),
    RowDot(Var, Var),
    Gather { input: Var, index: Vec<usize> },
    Softmax(Var),
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b) | Op::Add(a, b) | Op::Mul(a, b) | Op::RowDot(a, b) => vec![*a, *b],
            Op::Concat(parts) => parts.clone(),
            Op::Scale(a, _)
            | Op::Expand(a)
            | Op::Reshape(a)
            | Op::Sigmoid(a)
            | Op::LeakyRelu(a, _)
            | Op::Elu(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Softmax(a) => vec![*a],
            Op::Slice { input, .. }
            | Op::Permute { input, .. }
            | Op::Log { input, .. }
            | Op::Gather { input, .. } => vec![*input],
        }
    }
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Ordered record of a computation. Nodes are appended as operations run, so
/// every input precedes its outputs.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        let needs_grad = op.inputs().iter().any(|v| self.nodes[v.0].needs_grad);
        self.nodes.push(Node {
            value,
            op,
            needs_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Records a leaf. Gradients are only propagated towards leaves created
    /// with `requires_grad`.
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op: Op::Leaf,
            needs_grad: requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Matrix product over the last two dimensions.
    ///
    /// Supported forms: `[m,k]·[k,n]`, `[B,m,k]·[k,n]` (shared right operand)
    /// and `[B,m,k]·[B,k,n]` (batched).
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let sa = self.shape(a).to_vec();
        let sb = self.shape(b).to_vec();
        let mismatch = || Error::Shape {
            op: "matmul",
            lhs: sa.clone(),
            rhs: sb.clone(),
        };
        let out = match (sa.len(), sb.len()) {
            (2, 2) | (3, 2) => {
                let k = *sa.last().unwrap();
                if k != sb[0] {
                    return Err(mismatch());
                }
                let m: usize = sa[..sa.len() - 1].iter().product();
                let n = sb[1];
                let mut data = vec![0.0; m * n];
                gemm(self.value(a).data(), self.value(b).data(), &mut data, m, k, n);
                let mut shape = sa[..sa.len() - 1].to_vec();
                shape.push(n);
                Tensor::new(shape, data)?
            }
            (3, 3) => {
                let (batch, m, k) = (sa[0], sa[1], sa[2]);
                if sb[0] != batch || sb[1] != k {
                    return Err(mismatch());
                }
                let n = sb[2];
                let mut data = vec![0.0; batch * m * n];
                let (ad, bd) = (self.value(a).data(), self.value(b).data());
                for i in 0..batch {
                    gemm(
                        &ad[i * m * k..(i + 1) * m * k],
                        &bd[i * k * n..(i + 1) * k * n],
                        &mut data[i * m * n..(i + 1) * m * n],
                        m,
                        k,
                        n,
                    );
                }
                Tensor::new(vec![batch, m, n], data)?
            }
            _ => return Err(mismatch()),
        };
        Ok(self.push(out, Op::MatMul(a, b)))
    }

    fn broadcast_binary(
        &mut self,
        a: Var,
        b: Var,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        let shape = broadcast_shape(ta.shape(), tb.shape()).ok_or_else(|| Error::Shape {
            op: name,
            lhs: ta.shape().to_vec(),
            rhs: tb.shape().to_vec(),
        })?;
        let data = if ta.shape() == tb.shape() {
            ta.data().iter().zip(tb.data()).map(|(&x, &y)| f(x, y)).collect()
        } else {
            let ma = broadcast_map(&shape, ta.shape());
            let mb = broadcast_map(&shape, tb.shape());
            ma.iter()
                .zip(&mb)
                .map(|(&i, &j)| f(ta.data()[i], tb.data()[j]))
                .collect()
        };
        Tensor::new(shape, data)
    }

    /// Elementwise sum with broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary(a, b, "add", |x, y| x + y)?;
        Ok(self.push(out, Op::Add(a, b)))
    }

    /// Elementwise product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.broadcast_binary(a, b, "mul", |x, y| x * y)?;
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let t = self.value(a);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|x| x * c).collect())
            .expect("same shape");
        self.push(out, Op::Scale(a, c))
    }

    /// Broadcasts `a` to `shape`.
    pub fn expand(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if broadcast_shape(t.shape(), shape).as_deref() != Some(shape) {
            return Err(Error::Shape {
                op: "expand",
                lhs: t.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        let map = broadcast_map(shape, t.shape());
        let out = Tensor::new(shape.to_vec(), map.iter().map(|&i| t.data()[i]).collect())?;
        Ok(self.push(out, Op::Expand(a)))
    }

    /// Concatenation along the last dimension.
    pub fn concat_last(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::invalid("concat of zero tensors"))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s[..s.len() - 1] != lead[..] {
                return Err(Error::Shape {
                    op: "concat",
                    lhs: self.shape(*first).to_vec(),
                    rhs: s.to_vec(),
                });
            }
            widths.push(*s.last().unwrap());
        }
        let total: usize = widths.iter().sum();
        let rows: usize = lead.iter().product();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::Concat(parts.to_vec())))
    }

    /// Columns `start..start+len` of the last dimension.
    pub fn slice_last(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let width = *s.last().unwrap();
        if len == 0 || start + len > width {
            return Err(Error::invalid(format!(
                "slice {start}..{} out of range for width {width}",
                start + len
            )));
        }
        let rows = self.value(a).len() / width;
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(rows * len);
        for r in 0..rows {
            data.extend_from_slice(&src[r * width + start..r * width + start + len]);
        }
        let mut shape = s;
        *shape.last_mut().unwrap() = len;
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::Slice { input: a, start, len }))
    }

    /// Splits the last dimension into `parts` equal chunks.
    pub fn split_last(&mut self, a: Var, parts: usize) -> Result<Vec<Var>> {
        let width = *self.shape(a).last().unwrap();
        if parts == 0 || !width.is_multiple_of(parts) {
            return Err(Error::invalid(format!("cannot split width {width} into {parts}")));
        }
        let w = width / parts;
        (0..parts).map(|i| self.slice_last(a, i * w, w)).collect()
    }

    pub fn permute(&mut self, a: Var, axes: &[usize]) -> Result<Var> {
        let s = self.shape(a).to_vec();
        let mut sorted = axes.to_vec();
        sorted.sort_unstable();
        if sorted != (0..s.len()).collect::<Vec<_>>() {
            return Err(Error::invalid(format!("bad permutation {axes:?} for rank {}", s.len())));
        }
        let (shape, map) = permute_map(&s, axes);
        let src = self.value(a).data();
        let data = map.iter().map(|&i| src[i]).collect();
        let out = Tensor::new(shape, data)?;
        Ok(self.push(out, Op::Permute { input: a, map }))
    }

    /// Swaps the last two dimensions.
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let rank = self.shape(a).len();
        if rank < 2 {
            return Err(Error::invalid("transpose needs rank >= 2"));
        }
        let mut axes: Vec<usize> = (0..rank).collect();
        axes.swap(rank - 2, rank - 1);
        self.permute(a, &axes)
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(a).clone().reshaped(shape)?;
        Ok(self.push(out, Op::Reshape(a)))
    }

    fn unary(&mut self, a: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let t = self.value(a);
        let out = Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
            .expect("same shape");
        self.push(out, op)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        self.unary(a, sigmoid, Op::Sigmoid(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { slope * x }, Op::LeakyRelu(a, slope))
    }

    pub fn elu(&mut self, a: Var) -> Var {
        self.unary(a, |x| if x > 0.0 { x } else { x.exp_m1() }, Op::Elu(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        self.log_clamped(a, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `ln(clamp(x, lo, hi))`; the gradient is zero where the clamp binds.
    pub fn log_clamped(&mut self, a: Var, lo: f64, hi: f64) -> Var {
        self.unary(a, |x| x.clamp(lo, hi).ln(), Op::Log { input: a, lo, hi })
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        self.push(Tensor::scalar(s), Op::Sum(a))
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let m = t.data().iter().sum::<f64>() / t.len() as f64;
        self.push(Tensor::scalar(m), Op::Mean(a))
    }

    /// Row-wise inner product of two `[P, F]` matrices, giving `[P]`.
    pub fn row_dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 2 || ta.shape() != tb.shape() {
            return Err(Error::Shape {
                op: "row_dot",
                lhs: ta.shape().to_vec(),
                rhs: tb.shape().to_vec(),
            });
        }
        let (rows, cols) = (ta.shape()[0], ta.shape()[1]);
        let data = (0..rows)
            .map(|r| {
                ta.data()[r * cols..(r + 1) * cols]
                    .iter()
                    .zip(&tb.data()[r * cols..(r + 1) * cols])
                    .map(|(x, y)| x * y)
                    .sum()
            })
            .collect();
        let out = Tensor::new(vec![rows], data)?;
        Ok(self.push(out, Op::RowDot(a, b)))
    }

    /// Inner product of two vectors of equal length, as a scalar.
    pub fn inner_product(&mut self, a: Var, b: Var) -> Result<Var> {
        let (la, lb) = (self.value(a).len(), self.value(b).len());
        if la != lb {
            return Err(Error::Shape {
                op: "inner_product",
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let ra = self.reshape(a, &[1, la])?;
        let rb = self.reshape(b, &[1, lb])?;
        let d = self.row_dot(ra, rb)?;
        Ok(d)
    }

    /// Selects rows of a `[M, F]` matrix.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 || index.is_empty() {
            return Err(Error::invalid(format!(
                "gather_rows needs a matrix and a non-empty index, got {:?}",
                t.shape()
            )));
        }
        let (rows, cols) = (t.shape()[0], t.shape()[1]);
        let mut data = Vec::with_capacity(index.len() * cols);
        for &i in index {
            if i >= rows {
                return Err(Error::invalid(format!("row {i} out of range for {rows} rows")));
            }
            data.extend_from_slice(&t.data()[i * cols..(i + 1) * cols]);
        }
        let out = Tensor::new(vec![index.len(), cols], data)?;
        Ok(self.push(
            out,
            Op::Gather {
                input: a,
                index: index.to_vec(),
            },
        ))
    }

    /// Softmax over the last dimension of `logits + mask`.
    ///
    /// Mask entries must be `0` or `-inf` (or [`MASK_SENTINEL`]); masked
    /// outputs are exactly zero. A row with no unmasked entry is an error.
    pub fn masked_softmax(&mut self, logits: Var, mask: Option<&Tensor>) -> Result<Var> {
        let t = self.value(logits);
        let width = *t.shape().last().unwrap();
        let rows = t.len() / width;
        let mask_values: Option<Vec<f64>> = match mask {
            None => None,
            Some(m) => {
                if broadcast_shape(m.shape(), t.shape()).as_deref() != Some(t.shape()) {
                    return Err(Error::Shape {
                        op: "masked_softmax",
                        lhs: t.shape().to_vec(),
                        rhs: m.shape().to_vec(),
                    });
                }
                if let Some(bad) = m.data().iter().find(|&&x| x != 0.0 && !is_masked(x)) {
                    return Err(Error::invalid(format!("mask entry {bad} is neither 0 nor -inf")));
                }
                if m.shape() == t.shape() {
                    Some(m.data().to_vec())
                } else {
                    let map = broadcast_map(t.shape(), m.shape());
                    Some(map.iter().map(|&i| m.data()[i]).collect())
                }
            }
        };
        let src = t.data();
        let mut data = vec![0.0; src.len()];
        for r in 0..rows {
            let range = r * width..(r + 1) * width;
            let keep = |j: usize| mask_values.as_ref().is_none_or(|m| !is_masked(m[j]));
            let mut max = f64::NEG_INFINITY;
            for j in range.clone() {
                if keep(j) {
                    max = max.max(src[j]);
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::FullyMasked { row: r });
            }
            let mut total = 0.0;
            for j in range.clone() {
                if keep(j) {
                    let e = (src[j] - max).exp();
                    data[j] = e;
                    total += e;
                }
            }
            for j in range {
                data[j] /= total;
            }
        }
        let out = Tensor::new(t.shape().to_vec(), data)?;
        Ok(self.push(out, Op::Softmax(logits)))
    }

    pub fn softmax(&mut self, logits: Var) -> Result<Var> {
        self.masked_softmax(logits, None)
    }

    /// Reverse pass from a scalar `loss`.
    ///
    /// Gradients accumulate over fan-out. Leaves that do not require grad, or
    /// are not reachable from `loss`, get no entry (see [`Gradients::wrt`]).
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let loss_value = self.value(loss);
        if loss_value.len() != 1 {
            return Err(Error::NonScalarLoss(loss_value.shape().to_vec()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![1.0]);

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if node.needs_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[id] = Some(g);
        }

        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, node)| {
                g.filter(|_| node.needs_grad).map(|data| {
                    Tensor::new(node.value.shape().to_vec(), data).expect("gradient shape")
                })
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn grad_buf<'g>(&self, grads: &'g mut [Option<Vec<f64>>], v: Var) -> Option<&'g mut Vec<f64>> {
        if !self.nodes[v.0].needs_grad {
            return None;
        }
        let len = self.nodes[v.0].value.len();
        Some(grads[v.0].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, node: &Node, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let out = &node.value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (sa, sb) = (ta.shape(), tb.shape());
                if sb.len() == 2 {
                    let k = *sa.last().unwrap();
                    let m = ta.len() / k;
                    let n = sb[1];
                    if let Some(ga) = self.grad_buf(grads, *a) {
                        gemm_a_bt(g, tb.data(), ga, m, k, n);
                    }
                    if let Some(gb) = self.grad_buf(grads, *b) {
                        gemm_at_b(ta.data(), g, gb, m, k, n);
                    }
                } else {
                    let (batch, m, k, n) = (sa[0], sa[1], sa[2], sb[2]);
                    if let Some(ga) = self.grad_buf(grads, *a) {
                        for i in 0..batch {
                            gemm_a_bt(
                                &g[i * m * n..(i + 1) * m * n],
                                &tb.data()[i * k * n..(i + 1) * k * n],
                                &mut ga[i * m * k..(i + 1) * m * k],
                                m,
                                k,
                                n,
                            );
                        }
                    }
                    if let Some(gb) = self.grad_buf(grads, *b) {
                        for i in 0..batch {
                            gemm_at_b(
                                &ta.data()[i * m * k..(i + 1) * m * k],
                                &g[i * m * n..(i + 1) * m * n],
                                &mut gb[i * k * n..(i + 1) * k * n],
                                m,
                                k,
                                n,
                            );
                        }
                    }
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    let shape = self.shape(v).to_vec();
                    if let Some(gv) = self.grad_buf(grads, v) {
                        reduce_into(gv, g, out.shape(), &shape);
                    }
                }
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let ma = broadcast_map(out.shape(), ta.shape());
                let mb = broadcast_map(out.shape(), tb.shape());
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for (i, gi) in g.iter().enumerate() {
                        ga[ma[i]] += gi * tb.data()[mb[i]];
                    }
                }
                if let Some(gb) = self.grad_buf(grads, *b) {
                    for (i, gi) in g.iter().enumerate() {
                        gb[mb[i]] += gi * ta.data()[ma[i]];
                    }
                }
            }
            Op::Scale(a, c) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for (x, gi) in ga.iter_mut().zip(g) {
                        *x += gi * c;
                    }
                }
            }
            Op::Expand(a) => {
                let shape = self.shape(*a).to_vec();
                if let Some(ga) = self.grad_buf(grads, *a) {
                    reduce_into(ga, g, out.shape(), &shape);
                }
            }
            Op::Concat(parts) => {
                let total = *out.shape().last().unwrap();
                let rows = out.len() / total;
                let mut offset = 0;
                for &p in parts {
                    let w = *self.shape(p).last().unwrap();
                    if let Some(gp) = self.grad_buf(grads, p) {
                        for r in 0..rows {
                            for j in 0..w {
                                gp[r * w + j] += g[r * total + offset + j];
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::Slice { input, start, len } => {
                let width = *self.shape(*input).last().unwrap();
                if let Some(gi) = self.grad_buf(grads, *input) {
                    let rows = gi.len() / width;
                    for r in 0..rows {
                        for j in 0..*len {
                            gi[r * width + start + j] += g[r * len + j];
                        }
                    }
                }
            }
            Op::Permute { input, map } => {
                if let Some(gi) = self.grad_buf(grads, *input) {
                    for (o, &i) in map.iter().enumerate() {
                        gi[i] += g[o];
                    }
                }
            }
            Op::Reshape(a) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for (x, gi) in ga.iter_mut().zip(g) {
                        *x += gi;
                    }
                }
            }
            Op::Sigmoid(a) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for ((x, gi), y) in ga.iter_mut().zip(g).zip(out.data()) {
                        *x += gi * y * (1.0 - y);
                    }
                }
            }
            Op::LeakyRelu(a, slope) => {
                let input = self.value(*a).data();
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for ((x, gi), &v) in ga.iter_mut().zip(g).zip(input) {
                        *x += if v > 0.0 { *gi } else { gi * slope };
                    }
                }
            }
            Op::Elu(a) => {
                let input = self.value(*a).data();
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for (((x, gi), &v), y) in ga.iter_mut().zip(g).zip(input).zip(out.data()) {
                        *x += if v > 0.0 { *gi } else { gi * (y + 1.0) };
                    }
                }
            }
            Op::Log { input, lo, hi } => {
                let src = self.value(*input).data();
                if let Some(gi) = self.grad_buf(grads, *input) {
                    for ((x, gv), &v) in gi.iter_mut().zip(g).zip(src) {
                        if v > *lo && v < *hi {
                            *x += gv / v;
                        }
                    }
                }
            }
            Op::Sum(a) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for x in ga.iter_mut() {
                        *x += g[0];
                    }
                }
            }
            Op::Mean(a) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    let n = ga.len() as f64;
                    for x in ga.iter_mut() {
                        *x += g[0] / n;
                    }
                }
            }
            Op::RowDot(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let cols = ta.shape()[1];
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for (i, x) in ga.iter_mut().enumerate() {
                        *x += g[i / cols] * tb.data()[i];
                    }
                }
                if let Some(gb) = self.grad_buf(grads, *b) {
                    for (i, x) in gb.iter_mut().enumerate() {
                        *x += g[i / cols] * ta.data()[i];
                    }
                }
            }
            Op::Gather { input, index } => {
                let cols = self.shape(*input)[1];
                if let Some(gi) = self.grad_buf(grads, *input) {
                    for (p, &row) in index.iter().enumerate() {
                        for j in 0..cols {
                            gi[row * cols + j] += g[p * cols + j];
                        }
                    }
                }
            }
            Op::Softmax(a) => {
                let width = *out.shape().last().unwrap();
                let y = out.data();
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for r in 0..y.len() / width {
                        let range = r * width..(r + 1) * width;
                        let dot: f64 = y[range.clone()]
                            .iter()
                            .zip(&g[range.clone()])
                            .map(|(a, b)| a * b)
                            .sum();
                        for j in range {
                            ga[j] += y[j] * (g[j] - dot);
                        }
                    }
                }
            }
        }
    }
}

/// Sums `g` (shape `out_shape`) into `target` (broadcast source shape).
fn reduce_into(target: &mut [f64], g: &[f64], out_shape: &[usize], in_shape: &[usize]) {
    if out_shape == in_shape {
        for (x, gi) in target.iter_mut().zip(g) {
            *x += gi;
        }
    } else {
        let map = broadcast_map(out_shape, in_shape);
        for (i, &j) in map.iter().enumerate() {
            target[j] += g[i];
        }
    }
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Result of [`Tape::backward`], indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zeros when `v` was not reached.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(tape.shape(v)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_value() {
        let mut tape = Tape::new();
        let i = tape.constant(Tensor::identity(2));
        let m = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let p = tape.matmul(i, m).unwrap();
        assert_eq!(tape.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

        let a = tape.constant(t(&[1, 2], &[1.0, 2.0]));
        let b = tape.constant(t(&[2, 1], &[3.0, 4.0]));
        let c = tape.matmul(a, b).unwrap();
        assert_eq!(tape.value(c).data(), &[11.0]);
    }

    #[test]
    fn matmul_shape_mismatch_names_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = tape.matmul(a, b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn softmax_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[3], &[0.0, 0.0, 0.0]));
        let y = tape.softmax(x).unwrap();
        for &v in tape.value(y).data() {
            assert_abs_diff_eq!(v, 1.0 / 3.0, epsilon = 1e-15);
        }

        let x = tape.constant(t(&[2], &[5.0, 5.0]));
        let mask = t(&[2], &[0.0, f64::NEG_INFINITY]);
        let y = tape.masked_softmax(x, Some(&mask)).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 0.0]);

        let x = tape.constant(t(&[3], &[1.0, 2.0, 3.0]));
        let y = tape.softmax(x).unwrap();
        let expected = [0.09003, 0.24473, 0.66524];
        for (v, e) in tape.value(y).data().iter().zip(expected) {
            assert_abs_diff_eq!(*v, e, epsilon = 1e-5);
        }
    }

    #[test]
    fn fully_masked_row_is_an_error() {
        let mut tape = Tape::new();
        let x = tape.constant(t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let mask = t(&[2, 2], &[0.0, 0.0, MASK_SENTINEL, MASK_SENTINEL]);
        assert!(matches!(
            tape.masked_softmax(x, Some(&mask)),
            Err(Error::FullyMasked { row: 1 })
        ));
        let bad = t(&[2], &[0.0, 1.0]);
        assert!(tape.masked_softmax(x, Some(&bad)).is_err());
    }

    #[test]
    fn backward_linear_and_sigmoid() {
        let mut tape = Tape::new();
        let x = tape.param(t(&[3], &[1.0, -2.0, 0.5]));
        let s = tape.sum(x);
        let g = tape.backward(s).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 1.0, 1.0]);

        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(0.0));
        let y = tape.sigmoid(x);
        let g = tape.backward(y).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[0.25]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(&[2]));
        assert!(matches!(tape.backward(x), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn fan_out_accumulates_and_unreachable_is_zero() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::scalar(3.0));
        let unused = tape.param(Tensor::zeros(&[2]));
        let y = tape.mul(x, x).unwrap();
        let z = tape.add(y, x).unwrap();
        let g = tape.backward(z).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[7.0]);
        assert!(g.get(unused).is_none());
        assert_eq!(g.wrt(&tape, unused).data(), &[0.0, 0.0]);
    }

    #[test]
    fn concat_then_split_recovers_inputs() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_fn(&[2, 3, 2], |i| i as f64));
        let b = tape.constant(Tensor::from_fn(&[2, 3, 2], |i| -(i as f64)));
        let c = tape.concat_last(&[a, b]).unwrap();
        assert_eq!(tape.shape(c), &[2, 3, 4]);
        let parts = tape.split_last(c, 2).unwrap();
        assert_eq!(tape.value(parts[0]), tape.value(a));
        assert_eq!(tape.value(parts[1]), tape.value(b));
    }

    #[test]
    fn batched_matmul_matches_per_batch() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::from_fn(&[2, 2, 3], |i| i as f64 * 0.5));
        let b = tape.constant(Tensor::from_fn(&[2, 3, 2], |i| 1.0 - i as f64 * 0.25));
        let c = tape.matmul(a, b).unwrap();
        for batch in 0..2 {
            for i in 0..2 {
                for j in 0..2 {
                    let expected: f64 = (0..3)
                        .map(|k| tape.value(a).at(&[batch, i, k]) * tape.value(b).at(&[batch, k, j]))
                        .sum();
                    assert_abs_diff_eq!(tape.value(c).at(&[batch, i, j]), expected, epsilon = 1e-12);
                }
            }
        }
    }
}
