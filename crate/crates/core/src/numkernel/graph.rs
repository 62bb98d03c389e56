use super::{Gradients, ParamId, ParamStore, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone)]
enum Op {
    Input,
    Param(ParamId),
    /// `[m,k] x [k]` or `[m,k] x [k,n]`.
    MatMul(NodeId, NodeId),
    Add(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Scale(NodeId, f64),
    Sigmoid(NodeId),
    Tanh(NodeId),
    Concat(Vec<NodeId>),
    Slice(NodeId, usize),
    /// Plain or masked; dead entries have zero probability, so the backward
    /// rule is the same.
    Softmax(NodeId),
    /// `-log softmax(z)[target]` over live entries; the probabilities are
    /// kept in the node's `aux` buffer.
    MaskedNll(NodeId, Vec<bool>, usize),
    Sum(NodeId),
    SumSquares(NodeId),
    /// Row of a rank-2 parameter.
    Gather(ParamId, usize),
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Tensor,
    aux: Vec<f64>,
}

/// Records operations in creation order; every node's inputs precede it, so
/// the tape is acyclic by construction and backward is a reverse sweep.
#[derive(Debug)]
pub struct Graph<'p> {
    params: &'p ParamStore,
    nodes: Vec<Node>,
    param_nodes: Vec<Option<NodeId>>,
    checked: bool,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Stabilized (max-subtracted) softmax over the live entries; dead entries
/// get exactly zero.
pub fn softmax_values(z: &[f64], mask: Option<&[bool]>) -> Vec<f64> {
    let live = |i: usize| mask.is_none_or(|m| m[i]);
    let max = z
        .iter()
        .enumerate()
        .filter(|&(i, _)| live(i))
        .map(|(_, &v)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z
        .iter()
        .enumerate()
        .map(|(i, &v)| if live(i) { (v - max).exp() } else { 0.0 })
        .collect();
    let total: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= total);
    out
}

/// Log-probabilities over live entries; dead entries are `-inf`.
pub fn log_softmax_values(z: &[f64], mask: &[bool]) -> Vec<f64> {
    let max = z
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    let lse = z
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| (v - max).exp())
        .sum::<f64>()
        .ln()
        + max;
    z.iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v - lse } else { f64::NEG_INFINITY })
        .collect()
}

impl<'p> Graph<'p> {
    pub fn new(params: &'p ParamStore) -> Self {
        Graph {
            params,
            nodes: Vec::new(),
            param_nodes: vec![None; params.len()],
            checked: true,
        }
    }

    /// Disables the per-op finiteness assertion.
    pub fn unchecked(mut self) -> Self {
        self.checked = false;
        self
    }

    pub fn params(&self) -> &'p ParamStore {
        self.params
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        match self.nodes[id.0].op {
            Op::Param(p) => self.params.get(p),
            _ => &self.nodes[id.0].value,
        }
    }

    fn push(&mut self, op: Op, value: Tensor, name: &'static str) -> Result<NodeId> {
        if self.checked && !value.is_finite() {
            return Err(Error::NonFinite { op: name });
        }
        self.nodes.push(Node {
            op,
            value,
            aux: Vec::new(),
        });
        Ok(NodeId(self.nodes.len() - 1))
    }

    pub fn input(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Input,
            value,
            aux: Vec::new(),
        });
        NodeId(self.nodes.len() - 1)
    }

    /// Leaf for a parameter; repeated calls return the same node.
    pub fn param(&mut self, id: ParamId) -> NodeId {
        if let Some(n) = self.param_nodes[id.0] {
            return n;
        }
        self.nodes.push(Node {
            op: Op::Param(id),
            value: Tensor::zeros(&[0]),
            aux: Vec::new(),
        });
        let n = NodeId(self.nodes.len() - 1);
        self.param_nodes[id.0] = Some(n);
        n
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.rank() != 2 {
            return Err(Error::dim("matmul", format!("left operand has shape {:?}", av.shape())));
        }
        let (m, k) = (av.shape()[0], av.shape()[1]);
        if bv.shape().first() != Some(&k) || bv.rank() > 2 {
            return Err(Error::dim(
                "matmul",
                format!("{:?} x {:?}", av.shape(), bv.shape()),
            ));
        }
        let n = if bv.rank() == 2 { bv.shape()[1] } else { 1 };
        let (ad, bd) = (av.data(), bv.data());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let row = &ad[i * k..(i + 1) * k];
            if n == 1 {
                out[i] = row.iter().zip(bd).map(|(x, y)| x * y).sum();
            } else {
                for (kk, &x) in row.iter().enumerate() {
                    let brow = &bd[kk * n..(kk + 1) * n];
                    for (o, &y) in out[i * n..(i + 1) * n].iter_mut().zip(brow) {
                        *o += x * y;
                    }
                }
            }
        }
        let shape = if bv.rank() == 2 { vec![m, n] } else { vec![m] };
        self.push(Op::MatMul(a, b), Tensor::new(shape, out)?, "matmul")
    }

    fn same_shape(&self, op: &'static str, a: NodeId, b: NodeId) -> Result<()> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(Error::dim(op, format!("{sa:?} vs {sb:?}")));
        }
        Ok(())
    }

    fn zip_with(&self, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (av, bv) = (self.value(a), self.value(b));
        let data = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(av.shape().to_vec(), data).expect("shapes checked")
    }

    fn map(&self, a: NodeId, f: impl Fn(f64) -> f64) -> Tensor {
        let av = self.value(a);
        Tensor::new(av.shape().to_vec(), av.data().iter().map(|&x| f(x)).collect())
            .expect("same shape")
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("add", a, b)?;
        let v = self.zip_with(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), v, "add")
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.same_shape("mul", a, b)?;
        let v = self.zip_with(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), v, "mul")
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        let v = self.map(a, |x| x * s);
        self.push(Op::Scale(a, s), v, "scale")
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.map(a, sigmoid);
        self.push(Op::Sigmoid(a), v, "sigmoid")
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.map(a, f64::tanh);
        self.push(Op::Tanh(a), v, "tanh")
    }

    /// Concatenates vectors (scalars count as length one).
    pub fn concat(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let mut data = Vec::new();
        for &p in parts {
            let v = self.value(p);
            if v.rank() > 1 {
                return Err(Error::dim("concat", format!("operand has shape {:?}", v.shape())));
            }
            data.extend_from_slice(v.data());
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data), "concat")
    }

    pub fn slice(&mut self, a: NodeId, start: usize, len: usize) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 1 || start + len > v.len() {
            return Err(Error::dim(
                "slice",
                format!("[{start}, {}) of shape {:?}", start + len, v.shape()),
            ));
        }
        let data = v.data()[start..start + len].to_vec();
        self.push(Op::Slice(a, start), Tensor::vector(data), "slice")
    }

    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 1 || v.is_empty() {
            return Err(Error::dim("softmax", format!("input has shape {:?}", v.shape())));
        }
        let p = softmax_values(v.data(), None);
        self.push(Op::Softmax(a), Tensor::vector(p), "softmax")
    }

    pub fn masked_softmax(&mut self, a: NodeId, live: &[bool]) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 1 || v.len() != live.len() {
            return Err(Error::dim(
                "masked_softmax",
                format!("logits {:?} vs mask of {}", v.shape(), live.len()),
            ));
        }
        if !live.iter().any(|&m| m) {
            return Err(Error::dim("masked_softmax", "mask has no live entry"));
        }
        let p = softmax_values(v.data(), Some(live));
        self.push(Op::Softmax(a), Tensor::vector(p), "masked_softmax")
    }

    /// Negative log-likelihood of `target` under the masked softmax of `a`.
    pub fn masked_nll(&mut self, a: NodeId, live: &[bool], target: usize) -> Result<NodeId> {
        let v = self.value(a);
        if v.rank() != 1 || v.len() != live.len() || target >= live.len() || !live[target] {
            return Err(Error::dim(
                "masked_nll",
                format!("logits {:?}, mask of {}, target {target}", v.shape(), live.len()),
            ));
        }
        let logp = log_softmax_values(v.data(), live);
        let probs = softmax_values(v.data(), Some(live));
        let id = self.push(
            Op::MaskedNll(a, live.to_vec(), target),
            Tensor::scalar(-logp[target]),
            "masked_nll",
        )?;
        self.nodes[id.0].aux = probs;
        Ok(id)
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(s), "sum")
    }

    pub fn sum_squares(&mut self, a: NodeId) -> Result<NodeId> {
        let s = self.value(a).squared_norm();
        self.push(Op::SumSquares(a), Tensor::scalar(s), "sum_squares")
    }

    pub fn gather(&mut self, table: ParamId, row: usize) -> Result<NodeId> {
        let t = self.params.get(table);
        if t.rank() != 2 || row >= t.shape()[0] {
            return Err(Error::dim("gather", format!("row {row} of shape {:?}", t.shape())));
        }
        let cols = t.shape()[1];
        let data = t.data()[row * cols..(row + 1) * cols].to_vec();
        self.push(Op::Gather(table, row), Tensor::vector(data), "gather")
    }

    /// Sums a list of scalars.
    pub fn add_all(&mut self, terms: &[NodeId]) -> Result<NodeId> {
        let mut iter = terms.iter().copied();
        let first = iter
            .next()
            .ok_or_else(|| Error::dim("add_all", "no terms"))?;
        iter.try_fold(first, |acc, t| self.add(acc, t))
    }

    /// Reverse sweep from a scalar `loss`. Parameters the loss does not reach
    /// get zero gradient.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients> {
        if self.value(loss).len() != 1 {
            return Err(Error::dim(
                "backward",
                format!("loss must be scalar, got shape {:?}", self.value(loss).shape()),
            ));
        }
        let mut grads = Gradients::zeros_like(self.params);
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);

        fn acc(adj: &mut [Option<Vec<f64>>], id: NodeId, f: impl FnOnce(&mut [f64])) {
            let slot = adj[id.0].get_or_insert_with(Vec::new);
            f(slot);
        }

        for idx in (0..=loss.0).rev() {
            let Some(g) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            let out = &node.value;
            let sized = |adj: &mut Vec<Option<Vec<f64>>>, id: NodeId, n: usize| {
                let slot = adj[id.0].get_or_insert_with(|| vec![0.0; n]);
                if slot.is_empty() {
                    slot.resize(n, 0.0);
                }
            };
            match &node.op {
                Op::Input => {}
                Op::Param(p) => {
                    for (d, x) in grads.get_mut(*p).data_mut().iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::Gather(p, row) => {
                    let cols = g.len();
                    let dst = &mut grads.get_mut(*p).data_mut()[row * cols..(row + 1) * cols];
                    for (d, x) in dst.iter_mut().zip(&g) {
                        *d += x;
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let (m, k) = (av.shape()[0], av.shape()[1]);
                    let n = if bv.rank() == 2 { bv.shape()[1] } else { 1 };
                    sized(&mut adj, *a, m * k);
                    sized(&mut adj, *b, k * n);
                    let (ad, bd) = (av.data(), bv.data());
                    {
                        let da = adj[a.0].as_mut().unwrap();
                        for i in 0..m {
                            for kk in 0..k {
                                let mut s = 0.0;
                                for j in 0..n {
                                    s += g[i * n + j] * bd[kk * n + j];
                                }
                                da[i * k + kk] += s;
                            }
                        }
                    }
                    let db = adj[b.0].as_mut().unwrap();
                    for i in 0..m {
                        for kk in 0..k {
                            let x = ad[i * k + kk];
                            for j in 0..n {
                                db[kk * n + j] += x * g[i * n + j];
                            }
                        }
                    }
                }
                Op::Add(a, b) => {
                    for id in [a, b] {
                        sized(&mut adj, *id, g.len());
                        acc(&mut adj, *id, |d| d.iter_mut().zip(&g).for_each(|(d, x)| *d += x));
                    }
                }
                Op::Mul(a, b) => {
                    let (av, bv) = (self.value(*a).data(), self.value(*b).data());
                    sized(&mut adj, *a, g.len());
                    acc(&mut adj, *a, |d| {
                        for i in 0..g.len() {
                            d[i] += g[i] * bv[i];
                        }
                    });
                    sized(&mut adj, *b, g.len());
                    acc(&mut adj, *b, |d| {
                        for i in 0..g.len() {
                            d[i] += g[i] * av[i];
                        }
                    });
                }
                Op::Scale(a, s) => {
                    sized(&mut adj, *a, g.len());
                    acc(&mut adj, *a, |d| d.iter_mut().zip(&g).for_each(|(d, x)| *d += s * x));
                }
                Op::Sigmoid(a) => {
                    sized(&mut adj, *a, g.len());
                    let y = out.data();
                    acc(&mut adj, *a, |d| {
                        for i in 0..g.len() {
                            d[i] += g[i] * y[i] * (1.0 - y[i]);
                        }
                    });
                }
                Op::Tanh(a) => {
                    sized(&mut adj, *a, g.len());
                    let y = out.data();
                    acc(&mut adj, *a, |d| {
                        for i in 0..g.len() {
                            d[i] += g[i] * (1.0 - y[i] * y[i]);
                        }
                    });
                }
                Op::Concat(parts) => {
                    let mut offset = 0;
                    for p in parts {
                        let n = self.value(*p).len();
                        sized(&mut adj, *p, n);
                        let seg = &g[offset..offset + n];
                        acc(&mut adj, *p, |d| d.iter_mut().zip(seg).for_each(|(d, x)| *d += x));
                        offset += n;
                    }
                }
                Op::Slice(a, start) => {
                    let n = self.value(*a).len();
                    sized(&mut adj, *a, n);
                    acc(&mut adj, *a, |d| {
                        d[*start..*start + g.len()]
                            .iter_mut()
                            .zip(&g)
                            .for_each(|(d, x)| *d += x)
                    });
                }
                Op::Softmax(a) => {
                    let p = out.data();
                    let dot: f64 = p.iter().zip(&g).map(|(p, g)| p * g).sum();
                    sized(&mut adj, *a, g.len());
                    acc(&mut adj, *a, |d| {
                        for i in 0..g.len() {
                            d[i] += p[i] * (g[i] - dot);
                        }
                    });
                }
                Op::MaskedNll(a, live, target) => {
                    let p = &node.aux;
                    sized(&mut adj, *a, p.len());
                    acc(&mut adj, *a, |d| {
                        for i in 0..p.len() {
                            if live[i] {
                                let onehot = if i == *target { 1.0 } else { 0.0 };
                                d[i] += g[0] * (p[i] - onehot);
                            }
                        }
                    });
                }
                Op::Sum(a) => {
                    let n = self.value(*a).len();
                    sized(&mut adj, *a, n);
                    acc(&mut adj, *a, |d| d.iter_mut().for_each(|d| *d += g[0]));
                }
                Op::SumSquares(a) => {
                    let x = self.value(*a).data();
                    sized(&mut adj, *a, x.len());
                    acc(&mut adj, *a, |d| {
                        for i in 0..x.len() {
                            d[i] += 2.0 * g[0] * x[i];
                        }
                    });
                }
            }
        }
        Ok(grads)
    }
}
