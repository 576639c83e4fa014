//! Reverse-mode differentiation over dense vectors.
//!
//! A [`Tape`] is an append-only list of nodes. Every node's inputs have a
//! smaller index than the node itself, so a single reverse sweep visits the
//! graph in topological order. Parameters enter through [`Tape::param`],
//! which multiplies by the block's mask so masked entries never receive
//! gradient.

use crate::error::{Error, Result};
use crate::math::{bce_term, matvec_raw, relu, sigmoid};
use crate::params::{Grads, ParamId, ParamSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Clone, Debug)]
enum Op {
    Input,
    Param(ParamId),
    MatVec(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Relu(NodeId),
    /// Entries with `Some` are replaced by constants; the rest pass through.
    Override(NodeId, Vec<Option<f64>>),
    /// Summed logistic cross-entropy of logits against fixed targets.
    Bce(NodeId, Vec<f64>),
    Sum(Vec<NodeId>),
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    rows: usize,
    cols: usize,
    value: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    /// Gradient scratch, reused between backward passes.
    scratch: Vec<Vec<f64>>,
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

    pub fn value(&self, id: NodeId) -> &[f64] {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: NodeId) -> (usize, usize) {
        let n = &self.nodes[id.0];
        (n.rows, n.cols)
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[0]
    }

    fn push(&mut self, op: Op, rows: usize, cols: usize, value: Vec<f64>) -> NodeId {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node { op, rows, cols, value });
        NodeId(self.nodes.len() - 1)
    }

    /// Constant column vector.
    pub fn input(&mut self, data: &[f64]) -> NodeId {
        self.push(Op::Input, data.len(), 1, data.to_vec())
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        let b = params.block(id);
        let value = match &b.mask {
            Some(m) => b.data.iter().zip(m).map(|(d, m)| d * m).collect(),
            None => b.data.clone(),
        };
        self.push(Op::Param(id), b.rows, b.cols, value)
    }

    pub fn matvec(&mut self, m: NodeId, v: NodeId) -> Result<NodeId> {
        let (mr, mc) = self.shape(m);
        let (vr, vc) = self.shape(v);
        if vc != 1 || mc != vr {
            return Err(Error::shape(format!("matvec: matrix is {mr}x{mc} but vector is {vr}x{vc}")));
        }
        let value = matvec_raw(self.value(m), mr, mc, self.value(v));
        Ok(self.push(Op::MatVec(m, v), mr, 1, value))
    }

    fn same_shape(&self, what: &str, a: NodeId, b: NodeId) -> Result<(usize, usize)> {
        let sa = self.shape(a);
        let sb = self.shape(b);
        if sa != sb {
            return Err(Error::shape(format!("{what}: {}x{} vs {}x{}", sa.0, sa.1, sb.0, sb.1)));
        }
        Ok(sa)
    }

    fn zip(&mut self, op: Op, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64, what: &str) -> Result<NodeId> {
        let (r, c) = self.same_shape(what, a, b)?;
        let value = self.value(a).iter().zip(self.value(b)).map(|(x, y)| f(*x, *y)).collect();
        Ok(self.push(op, r, c, value))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(Op::Add(a, b), a, b, |x, y| x + y, "add")
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(Op::Sub(a, b), a, b, |x, y| x - y, "sub")
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(Op::Mul(a, b), a, b, |x, y| x * y, "mul")
    }

    fn unary(&mut self, op: Op, a: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let (r, c) = self.shape(a);
        let value = self.value(a).iter().map(|&z| f(z)).collect();
        self.push(op, r, c, value)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Sigmoid(a), a, sigmoid)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Tanh(a), a, f64::tanh)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Relu(a), a, relu)
    }

    pub fn override_entries(&mut self, a: NodeId, with: &[Option<f64>]) -> Result<NodeId> {
        let (r, c) = self.shape(a);
        if with.len() != r * c {
            return Err(Error::shape(format!("override: node has {} entries, override has {}", r * c, with.len())));
        }
        let value = self.value(a).iter().zip(with).map(|(v, o)| o.unwrap_or(*v)).collect();
        Ok(self.push(Op::Override(a, with.to_vec()), r, c, value))
    }

    /// `sum_k softplus(a_k) - t_k a_k`, the summed logistic cross-entropy.
    pub fn bce(&mut self, logits: NodeId, targets: &[f64]) -> Result<NodeId> {
        let (r, c) = self.shape(logits);
        if targets.len() != r * c {
            return Err(Error::shape(format!("bce: {} logits vs {} targets", r * c, targets.len())));
        }
        let v = self.value(logits).iter().zip(targets).map(|(a, t)| bce_term(*a, *t)).sum();
        Ok(self.push(Op::Bce(logits, targets.to_vec()), 1, 1, vec![v]))
    }

    /// Sum of scalar nodes.
    pub fn sum(&mut self, items: &[NodeId]) -> Result<NodeId> {
        if let Some(bad) = items.iter().find(|id| self.shape(**id) != (1, 1)) {
            let (r, c) = self.shape(*bad);
            return Err(Error::shape(format!("sum expects scalars, got {r}x{c}")));
        }
        let v = items.iter().map(|id| self.scalar(*id)).sum();
        Ok(self.push(Op::Sum(items.to_vec()), 1, 1, vec![v]))
    }

    /// Gradients of a scalar node with respect to every parameter block.
    /// Blocks that do not feed the loss get exact zeros.
    pub fn backward(&mut self, loss: NodeId, params: &ParamSet) -> Result<Grads> {
        let (r, c) = self.shape(loss);
        if (r, c) != (1, 1) {
            return Err(Error::contract(format!("backward needs a scalar loss, got {r}x{c}")));
        }
        let mut grads = Grads::zeros_like(params);
        let n = loss.0 + 1;
        self.scratch.clear();
        self.scratch.resize_with(n, Vec::new);
        let g = &mut self.scratch;
        g[loss.0] = vec![1.0];

        for i in (0..n).rev() {
            if g[i].is_empty() {
                continue;
            }
            let gi = std::mem::take(&mut g[i]);
            let node = &self.nodes[i];
            match &node.op {
                Op::Input => {}
                Op::Param(pid) => {
                    let dst = &mut grads.blocks[pid.0];
                    match &params.block(*pid).mask {
                        Some(m) => dst.iter_mut().zip(&gi).zip(m).for_each(|((d, x), m)| *d += x * m),
                        None => dst.iter_mut().zip(&gi).for_each(|(d, x)| *d += x),
                    }
                }
                Op::MatVec(m, v) => {
                    let (rows, cols) = (self.nodes[m.0].rows, self.nodes[m.0].cols);
                    let mv = &self.nodes[m.0].value;
                    let vv = &self.nodes[v.0].value;
                    let gm = slot(g, *m, rows * cols);
                    for r in 0..rows {
                        let gr = gi[r];
                        if gr != 0.0 {
                            for (dst, x) in gm[r * cols..(r + 1) * cols].iter_mut().zip(vv) {
                                *dst += gr * x;
                            }
                        }
                    }
                    let gv = slot(g, *v, cols);
                    for r in 0..rows {
                        let gr = gi[r];
                        if gr != 0.0 {
                            for (dst, x) in gv.iter_mut().zip(&mv[r * cols..(r + 1) * cols]) {
                                *dst += gr * x;
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(slot(g, *a, gi.len()), &gi, |x, _| x, &[]);
                    accumulate(slot(g, *b, gi.len()), &gi, |x, _| x, &[]);
                }
                Op::Sub(a, b) => {
                    accumulate(slot(g, *a, gi.len()), &gi, |x, _| x, &[]);
                    accumulate(slot(g, *b, gi.len()), &gi, |x, _| -x, &[]);
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    accumulate(slot(g, *a, gi.len()), &gi, |x, y| x * y, bv);
                    accumulate(slot(g, *b, gi.len()), &gi, |x, y| x * y, av);
                }
                Op::Sigmoid(a) => {
                    accumulate(slot(g, *a, gi.len()), &gi, |x, s| x * s * (1.0 - s), &node.value);
                }
                Op::Tanh(a) => {
                    accumulate(slot(g, *a, gi.len()), &gi, |x, t| x * (1.0 - t * t), &node.value);
                }
                Op::Relu(a) => {
                    let av = &self.nodes[a.0].value;
                    accumulate(slot(g, *a, gi.len()), &gi, |x, z| if z > 0.0 { x } else { 0.0 }, av);
                }
                Op::Override(a, with) => {
                    let ga = slot(g, *a, gi.len());
                    for ((d, x), o) in ga.iter_mut().zip(&gi).zip(with) {
                        if o.is_none() {
                            *d += x;
                        }
                    }
                }
                Op::Bce(a, targets) => {
                    let av = &self.nodes[a.0].value;
                    let ga = slot(g, *a, av.len());
                    for ((d, z), t) in ga.iter_mut().zip(av).zip(targets) {
                        *d += gi[0] * (sigmoid(*z) - t);
                    }
                }
                Op::Sum(items) => {
                    for it in items {
                        slot(g, *it, 1)[0] += gi[0];
                    }
                }
            }
        }
        Ok(grads)
    }
}

fn slot(g: &mut [Vec<f64>], id: NodeId, len: usize) -> &mut Vec<f64> {
    let s = &mut g[id.0];
    if s.is_empty() {
        s.resize(len, 0.0);
    }
    s
}

fn accumulate(dst: &mut [f64], upstream: &[f64], f: impl Fn(f64, f64) -> f64, aux: &[f64]) {
    if aux.is_empty() {
        dst.iter_mut().zip(upstream).for_each(|(d, x)| *d += f(*x, 0.0));
    } else {
        dst.iter_mut().zip(upstream).zip(aux).for_each(|((d, x), y)| *d += f(*x, *y));
    }
}
