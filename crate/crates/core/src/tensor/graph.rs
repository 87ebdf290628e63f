use super::ops;
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a tensor recorded in a [`GradGraph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op<S> {
    Leaf,
    Conv3d(NodeId, NodeId, NodeId),
    Conv2d(NodeId, NodeId, NodeId),
    Affine(NodeId, NodeId, NodeId),
    MatMul(NodeId, NodeId),
    MatMulNt(NodeId, NodeId),
    Scale(NodeId, S),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Relu(NodeId),
    SoftmaxRows(NodeId),
    ConcatCols(Vec<NodeId>),
    ConcatRows(Vec<NodeId>),
    Reshape(NodeId),
    QuadrantPool(NodeId),
    Sum(NodeId),
    CrossEntropy(NodeId, Vec<usize>),
}

impl<S> Op<S> {
    fn inputs(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::Conv3d(a, b, c) | Op::Conv2d(a, b, c) | Op::Affine(a, b, c) => vec![*a, *b, *c],
            Op::MatMul(a, b) | Op::MatMulNt(a, b) | Op::Add(a, b) | Op::Mul(a, b) => vec![*a, *b],
            Op::Scale(a, _)
            | Op::Relu(a)
            | Op::SoftmaxRows(a)
            | Op::Reshape(a)
            | Op::QuadrantPool(a)
            | Op::Sum(a)
            | Op::CrossEntropy(a, _) => vec![*a],
            Op::ConcatCols(v) | Op::ConcatRows(v) => v.clone(),
        }
    }
}

/// Ordered record of executed operations.
///
/// Nodes are appended in execution order; [`GradGraph::backward`] replays the
/// adjoints in exactly the reverse order. A graph is single-threaded and is
/// meant to be built fresh for each forward pass.
#[derive(Debug, Default)]
pub struct GradGraph<S: Scalar = f32> {
    nodes: Vec<(Tensor<S>, Op<S>)>,
}

impl<S: Scalar> GradGraph<S> {
    pub fn new() -> Self {
        Self { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Record a leaf; it takes part in backward iff `requires_grad` is set.
    pub fn leaf(&mut self, mut t: Tensor<S>) -> NodeId {
        t.grad = None;
        self.nodes.push((t, Op::Leaf));
        NodeId(self.nodes.len() - 1)
    }

    /// Record a constant input (no gradient).
    pub fn input(&mut self, mut t: Tensor<S>) -> NodeId {
        t.requires_grad = false;
        self.leaf(t)
    }

    /// Record a trainable copy of `t`.
    pub fn param(&mut self, t: &Tensor<S>) -> NodeId {
        let mut t = t.clone();
        t.requires_grad = true;
        self.leaf(t)
    }

    pub fn value(&self, id: NodeId) -> &Tensor<S> {
        &self.nodes[id.0].0
    }

    /// Gradient populated by the last [`backward`](Self::backward) call.
    pub fn grad(&self, id: NodeId) -> Option<&[S]> {
        self.nodes[id.0].0.grad.as_deref()
    }

    fn push(&mut self, mut value: Tensor<S>, op: Op<S>) -> NodeId {
        value.requires_grad = op.inputs().iter().any(|i| self.nodes[i.0].0.requires_grad);
        value.grad = None;
        self.nodes.push((value, op));
        NodeId(self.nodes.len() - 1)
    }

    pub fn conv3d(&mut self, x: NodeId, kernels: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::conv3d(self.value(x), self.value(kernels), self.value(bias))?;
        Ok(self.push(v, Op::Conv3d(x, kernels, bias)))
    }

    pub fn conv2d(&mut self, x: NodeId, kernels: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::conv2d(self.value(x), self.value(kernels), self.value(bias))?;
        Ok(self.push(v, Op::Conv2d(x, kernels, bias)))
    }

    pub fn affine(&mut self, x: NodeId, weight: NodeId, bias: NodeId) -> Result<NodeId> {
        let v = ops::affine(self.value(x), self.value(weight), self.value(bias))?;
        Ok(self.push(v, Op::Affine(x, weight, bias)))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    /// `a·bᵀ`
    pub fn matmul_nt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = ops::matmul_nt(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMulNt(a, b)))
    }

    pub fn scale(&mut self, x: NodeId, s: S) -> NodeId {
        let t = self.value(x);
        let v = Tensor::new(t.shape(), t.data().iter().map(|&v| v * s).collect()).unwrap();
        self.push(v, Op::Scale(x, s))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim(format!("add {:?} + {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x + y).collect();
        let v = Tensor::new(ta.shape(), data)?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(Error::dim(format!("mul {:?} * {:?}", ta.shape(), tb.shape())));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(&x, &y)| x * y).collect();
        let v = Tensor::new(ta.shape(), data)?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = ops::relu(self.value(x));
        self.push(v, Op::Relu(x))
    }

    pub fn softmax_rows(&mut self, x: NodeId) -> Result<NodeId> {
        let v = ops::softmax_rows(self.value(x))?;
        Ok(self.push(v, Op::SoftmaxRows(x)))
    }

    /// Concatenate `n×mᵢ` matrices side by side.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("concat_cols of nothing"))?;
        let n = self.value(*first).shape()[0];
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.value(p).shape();
            if s.len() != 2 || s[0] != n {
                return Err(Error::dim(format!("concat_cols: part shape {s:?}, rows {n}")));
            }
            widths.push(s[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for r in 0..n {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[r * w..(r + 1) * w]);
            }
        }
        let v = Tensor::new(&[n, total], data)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    /// Stack matrices (or vectors, as single rows) with a shared width.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = parts
            .first()
            .ok_or_else(|| Error::dim("concat_rows of nothing"))?;
        let width = *self.value(*first).shape().last().unwrap();
        let mut data = Vec::new();
        for &p in parts {
            let t = self.value(p);
            if t.ndim() > 2 || *t.shape().last().unwrap() != width {
                return Err(Error::dim(format!(
                    "concat_rows: part shape {:?}, width {width}",
                    t.shape()
                )));
            }
            data.extend_from_slice(t.data());
        }
        let rows = data.len() / width;
        let v = Tensor::new(&[rows, width], data)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    pub fn reshape(&mut self, x: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(x).reshape(shape)?;
        Ok(self.push(v, Op::Reshape(x)))
    }

    /// Four quadrant-average tokens from a `P×P×C` map; see [`ops::quadrant_pool`].
    pub fn quadrant_pool(&mut self, x: NodeId) -> Result<NodeId> {
        let v = ops::quadrant_pool(self.value(x))?;
        Ok(self.push(v, Op::QuadrantPool(x)))
    }

    pub fn sum(&mut self, x: NodeId) -> NodeId {
        let total = self.value(x).data().iter().copied().sum();
        self.push(Tensor::scalar(total), Op::Sum(x))
    }

    /// Mean softmax cross-entropy against 0-based targets.
    pub fn cross_entropy(&mut self, logits: NodeId, targets: &[usize]) -> Result<NodeId> {
        let loss = ops::cross_entropy(self.value(logits), targets)?;
        Ok(self.push(Tensor::scalar(loss), Op::CrossEntropy(logits, targets.to_vec())))
    }

    /// Smallest `|x|` over every relu input in the graph. Finite differences
    /// are only trustworthy when this exceeds the perturbation size.
    pub fn min_relu_margin(&self) -> S {
        self.nodes
            .iter()
            .filter_map(|(_, op)| match op {
                Op::Relu(x) => Some(*x),
                _ => None,
            })
            .flat_map(|x| self.value(x).data().iter().map(|v| v.abs()))
            .fold(S::infinity(), S::min)
    }

    /// Reverse-mode sweep from a scalar `loss`.
    ///
    /// Afterwards every node that requires grad and is reachable from the
    /// loss holds `∂loss/∂node` in its `grad` field.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        if !self.value(loss).is_scalar() {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        for (t, _) in &mut self.nodes {
            t.grad = None;
        }
        let mut grads: Vec<Option<Vec<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(vec![S::one()]);
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.nodes[idx].0.requires_grad {
                continue;
            }
            let contributions = self.adjoint(idx, &g)?;
            for (input, gi) in contributions {
                if !self.nodes[input.0].0.requires_grad {
                    continue;
                }
                match &mut grads[input.0] {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(&gi) {
                            *a += *b;
                        }
                    }
                    slot => *slot = Some(gi),
                }
            }
            self.nodes[idx].0.grad = Some(g);
        }
        Ok(())
    }

    fn adjoint(&self, idx: usize, g: &[S]) -> Result<Vec<(NodeId, Vec<S>)>> {
        let (out, op) = &self.nodes[idx];
        let v = |id: NodeId| self.value(id);
        Ok(match op {
            Op::Leaf => vec![],
            Op::Conv3d(x, k, b) => {
                let (gx, gk, gb) = ops::conv3d_backward(v(*x), v(*k), v(*b), g)?;
                vec![(*x, gx), (*k, gk), (*b, gb)]
            }
            Op::Conv2d(x, k, b) => {
                let (gx, gk, gb) = ops::conv2d_backward(v(*x), v(*k), v(*b), g)?;
                vec![(*x, gx), (*k, gk), (*b, gb)]
            }
            Op::Affine(x, w, b) => {
                let (gx, gw, gb) = ops::affine_backward(v(*x), v(*w), g);
                vec![(*x, gx), (*w, gw), (*b, gb)]
            }
            Op::MatMul(a, b) => {
                let (ga, gb) = ops::matmul_backward(v(*a), v(*b), g);
                vec![(*a, ga), (*b, gb)]
            }
            Op::MatMulNt(a, b) => {
                let (ga, gb) = ops::matmul_nt_backward(v(*a), v(*b), g);
                vec![(*a, ga), (*b, gb)]
            }
            Op::Scale(x, s) => vec![(*x, g.iter().map(|&gi| gi * *s).collect())],
            Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
            Op::Mul(a, b) => {
                let ga = g.iter().zip(v(*b).data()).map(|(&gi, &y)| gi * y).collect();
                let gb = g.iter().zip(v(*a).data()).map(|(&gi, &x)| gi * x).collect();
                vec![(*a, ga), (*b, gb)]
            }
            Op::Relu(x) => vec![(*x, ops::relu_backward(v(*x), g))],
            Op::SoftmaxRows(x) => vec![(*x, ops::softmax_rows_backward(out, g))],
            Op::ConcatCols(parts) => {
                let total = out.shape()[1];
                let mut offset = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let w = v(p).shape()[1];
                        let gp = g
                            .chunks_exact(total)
                            .flat_map(|row| row[offset..offset + w].iter().copied())
                            .collect();
                        offset += w;
                        (p, gp)
                    })
                    .collect()
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                parts
                    .iter()
                    .map(|&p| {
                        let n = v(p).len();
                        let gp = g[offset..offset + n].to_vec();
                        offset += n;
                        (p, gp)
                    })
                    .collect()
            }
            Op::Reshape(x) => vec![(*x, g.to_vec())],
            Op::QuadrantPool(x) => vec![(*x, ops::quadrant_pool_backward(v(*x), g))],
            Op::Sum(x) => vec![(*x, vec![g[0]; v(*x).len()])],
            Op::CrossEntropy(x, targets) => {
                vec![(*x, ops::cross_entropy_backward(v(*x), targets, g[0]))]
            }
        })
    }
}
