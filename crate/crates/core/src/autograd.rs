//! Reverse-mode differentiation over a closed set of tensor operations.
//!
//! A [`Graph`] records every operation of one forward pass. Parameter nodes
//! share storage with the [`ParamSet`] they came from, and
//! [`Graph::backward`] accumulates into each reachable
//! [`Parameter::gradient`](crate::param::Parameter). A graph can be
//! differentiated once; a second call reports a stale graph.

use crate::param::{ParamId, ParamSet};
use crate::tensor::{matmul_at_into, matmul_bt_into, Result, Tensor, TensorError};

/// Additive value that stands in for −∞ inside masked softmax.
pub const MASK_SENTINEL: f64 = -1e9;

/// Returns true for mask entries that mean "excluded".
pub fn is_masked(v: f64) -> bool {
    v <= MASK_SENTINEL
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeId(usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryKind {
    Tanh,
    Sigmoid,
    Relu,
}

impl UnaryKind {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            UnaryKind::Tanh => x.tanh(),
            UnaryKind::Sigmoid => sigmoid(x),
            UnaryKind::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the output `y = f(x)`.
    fn derivative(self, y: f64) -> f64 {
        match self {
            UnaryKind::Tanh => 1.0 - y * y,
            UnaryKind::Sigmoid => y * (1.0 - y),
            UnaryKind::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(NodeId, NodeId),
    Transpose(NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    AddRow(NodeId, NodeId),
    Scale(NodeId, f64),
    Unary(UnaryKind, NodeId),
    MaskedSoftmax(NodeId),
    ConcatCols(Vec<NodeId>),
    SliceCols(NodeId, usize),
    Row(NodeId, usize),
    StackRows(Vec<NodeId>),
    BroadcastRows(NodeId),
    MaskRows(NodeId, Vec<bool>),
    Reshape(NodeId),
    Sum(NodeId),
    EmbedMean(ParamId, Vec<Vec<usize>>),
    CrossEntropy(NodeId, usize),
}

struct Node {
    value: Tensor,
    op: Op,
}

/// One forward pass worth of recorded operations.
pub struct Graph {
    nodes: Vec<Node>,
    consumed: bool,
    requires_grad: Vec<bool>,
}

impl Default for Graph {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::Shape {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

impl Graph {
    pub fn new() -> Self {
        Self {
            nodes: Vec::with_capacity(256),
            consumed: false,
            requires_grad: Vec::with_capacity(256),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> NodeId {
        self.nodes.push(Node { value, op });
        self.requires_grad.push(requires_grad);
        NodeId(self.nodes.len() - 1)
    }

    fn rg(&self, id: NodeId) -> bool {
        self.requires_grad[id.0]
    }

    fn checked(&mut self, value: Tensor, op: Op, name: &'static str, rg: bool) -> Result<NodeId> {
        if !value.all_finite() {
            return Err(TensorError::NonFinite { op: name });
        }
        Ok(self.push(value, op, rg))
    }

    /// A constant input; gradients do not flow into it.
    pub fn constant(&mut self, value: Tensor) -> Result<NodeId> {
        self.checked(value, Op::Leaf, "constant", false)
    }

    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> NodeId {
        self.push(params.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let v = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(v, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let v = self.value(a);
        if v.shape().len() != 2 {
            return Err(TensorError::Shape {
                op: "transpose",
                left: v.shape().to_vec(),
                right: vec![],
            });
        }
        let t = v.transpose();
        let rg = self.rg(a);
        Ok(self.push(t, Op::Transpose(a), rg))
    }

    fn zip(&mut self, a: NodeId, b: NodeId, name: &'static str, op: Op, f: fn(f64, f64) -> f64) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(shape_err(name, va, vb));
        }
        let data = va.data().iter().zip(vb.data()).map(|(&x, &y)| f(x, y)).collect();
        let v = Tensor::new(va.shape(), data)?;
        let rg = self.rg(a) || self.rg(b);
        self.checked(v, op, name, rg)
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(a, b, "add", Op::Add(a, b), |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(a, b, "sub", Op::Sub(a, b), |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.zip(a, b, "mul", Op::Mul(a, b), |x, y| x * y)
    }

    /// Adds a length-`n` vector to every row of an `[m×n]` matrix.
    pub fn add_row(&mut self, a: NodeId, bias: NodeId) -> Result<NodeId> {
        let (va, vb) = (self.value(a), self.value(bias));
        let (m, n) = va.dims2();
        if vb.len() != n {
            return Err(shape_err("add_row", va, vb));
        }
        let mut data = va.data().to_vec();
        for r in 0..m {
            for (x, &b) in data[r * n..(r + 1) * n].iter_mut().zip(vb.data()) {
                *x += b;
            }
        }
        let v = Tensor::new(va.shape(), data)?;
        let rg = self.rg(a) || self.rg(bias);
        self.checked(v, Op::AddRow(a, bias), "add_row", rg)
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> Result<NodeId> {
        let v = self.value(a).map(|x| x * s);
        let rg = self.rg(a);
        self.checked(v, Op::Scale(a, s), "scale", rg)
    }

    pub fn unary(&mut self, kind: UnaryKind, a: NodeId) -> Result<NodeId> {
        let v = self.value(a).map(|x| kind.apply(x));
        let rg = self.rg(a);
        self.checked(v, Op::Unary(kind, a), "unary", rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryKind::Tanh, a)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryKind::Sigmoid, a)
    }

    pub fn relu(&mut self, a: NodeId) -> Result<NodeId> {
        self.unary(UnaryKind::Relu, a)
    }

    /// Row-wise softmax of `logits + mask`. Mask entries are 0 or −∞
    /// (anything at or below [`MASK_SENTINEL`] counts as −∞); masked outputs
    /// are exactly zero.
    pub fn masked_softmax(&mut self, logits: NodeId, mask: &Tensor) -> Result<NodeId> {
        let v = masked_softmax_values(self.value(logits), mask)?;
        let rg = self.rg(logits);
        self.checked(v, Op::MaskedSoftmax(logits), "masked_softmax", rg)
    }

    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        let first = self.value(parts[0]);
        let m = first.rows();
        let mut total = 0;
        for &p in parts {
            let v = self.value(p);
            if v.rows() != m {
                return Err(shape_err("concat_cols", first, v));
            }
            total += v.cols();
        }
        let mut data = vec![0.0; m * total];
        let mut offset = 0;
        for &p in parts {
            let v = self.value(p);
            let c = v.cols();
            for r in 0..m {
                data[r * total + offset..r * total + offset + c].copy_from_slice(v.row(r));
            }
            offset += c;
        }
        let v = Tensor::new(&[m, total], data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(v, Op::ConcatCols(parts.to_vec()), rg))
    }

    pub fn slice_cols(&mut self, a: NodeId, start: usize, width: usize) -> Result<NodeId> {
        let va = self.value(a);
        let (m, n) = va.dims2();
        if width == 0 || start + width > n {
            return Err(TensorError::Index { index: start + width, len: n });
        }
        let mut data = Vec::with_capacity(m * width);
        for r in 0..m {
            data.extend_from_slice(&va.row(r)[start..start + width]);
        }
        let v = Tensor::new(&[m, width], data)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::SliceCols(a, start), rg))
    }

    /// Row `r` of a matrix as a `[1×n]` matrix.
    pub fn row(&mut self, a: NodeId, r: usize) -> Result<NodeId> {
        let va = self.value(a);
        let (m, n) = va.dims2();
        if r >= m {
            return Err(TensorError::Index { index: r, len: m });
        }
        let v = Tensor::new(&[1, n], va.row(r).to_vec())?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Row(a, r), rg))
    }

    /// Stacks `[1×n]` (or length-`n`) nodes into an `[k×n]` matrix.
    pub fn stack_rows(&mut self, rows: &[NodeId]) -> Result<NodeId> {
        let first = self.value(rows[0]);
        let n = first.len();
        let mut data = Vec::with_capacity(rows.len() * n);
        for &r in rows {
            let v = self.value(r);
            if v.len() != n {
                return Err(shape_err("stack_rows", first, v));
            }
            data.extend_from_slice(v.data());
        }
        let v = Tensor::new(&[rows.len(), n], data)?;
        let rg = rows.iter().any(|&r| self.rg(r));
        Ok(self.push(v, Op::StackRows(rows.to_vec()), rg))
    }

    /// Repeats a single row `times` times.
    pub fn broadcast_rows(&mut self, a: NodeId, times: usize) -> Result<NodeId> {
        let va = self.value(a);
        let mut data = Vec::with_capacity(times * va.len());
        for _ in 0..times {
            data.extend_from_slice(va.data());
        }
        let v = Tensor::new(&[times, va.len()], data)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::BroadcastRows(a), rg))
    }

    /// Zeroes rows whose flag is false; no gradient reaches them.
    pub fn mask_rows(&mut self, a: NodeId, keep: &[bool]) -> Result<NodeId> {
        let va = self.value(a);
        let (m, n) = va.dims2();
        if keep.len() != m {
            return Err(TensorError::Shape {
                op: "mask_rows",
                left: va.shape().to_vec(),
                right: vec![keep.len()],
            });
        }
        let mut data = va.data().to_vec();
        for (r, &k) in keep.iter().enumerate() {
            if !k {
                data[r * n..(r + 1) * n].fill(0.0);
            }
        }
        let v = Tensor::new(va.shape(), data)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::MaskRows(a, keep.to_vec()), rg))
    }

    pub fn reshape(&mut self, a: NodeId, shape: &[usize]) -> Result<NodeId> {
        let v = self.value(a).reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(v, Op::Reshape(a), rg))
    }

    pub fn sum(&mut self, a: NodeId) -> Result<NodeId> {
        let v = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.checked(v, Op::Sum(a), "sum", rg)
    }

    /// Row `r` of the output is the mean of the table rows listed in
    /// `rows[r]`; an empty list yields a zero row.
    pub fn embed_mean(&mut self, params: &ParamSet, table: ParamId, rows: Vec<Vec<usize>>) -> Result<NodeId> {
        let t = params.value(table);
        let (vocab, dim) = t.dims2();
        let mut data = vec![0.0; rows.len().max(1) * dim];
        for (r, list) in rows.iter().enumerate() {
            if list.is_empty() {
                continue;
            }
            let out = &mut data[r * dim..(r + 1) * dim];
            for &k in list {
                if k >= vocab {
                    return Err(TensorError::Index { index: k, len: vocab });
                }
                for (o, &e) in out.iter_mut().zip(t.row(k)) {
                    *o += e;
                }
            }
            let inv = 1.0 / list.len() as f64;
            out.iter_mut().for_each(|o| *o *= inv);
        }
        let v = Tensor::new(&[rows.len().max(1), dim], data)?;
        self.checked(v, Op::EmbedMean(table, rows), "embed_mean", true)
    }

    /// `−log softmax(logits)[gold]` as a scalar node.
    pub fn cross_entropy(&mut self, logits: NodeId, gold: usize) -> Result<NodeId> {
        let v = self.value(logits);
        let n = v.len();
        if gold >= n {
            return Err(TensorError::Index { index: gold, len: n });
        }
        let lse = log_sum_exp(v.data());
        let loss = lse - v.data()[gold];
        let rg = self.rg(logits);
        self.checked(Tensor::scalar(loss), Op::CrossEntropy(logits, gold), "cross_entropy", rg)
    }

    /// Accumulates d(loss)/d(parameter) into every reachable parameter's
    /// gradient. The graph cannot be differentiated again afterwards.
    pub fn backward(&mut self, loss: NodeId, params: &mut ParamSet) -> Result<()> {
        if self.consumed {
            return Err(TensorError::StaleGraph);
        }
        if self.value(loss).len() != 1 {
            return Err(TensorError::NotScalar(self.value(loss).shape().to_vec()));
        }
        self.consumed = true;

        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);

        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !self.requires_grad[idx] {
                continue;
            }
            let node = &self.nodes[idx];
            match &node.op {
                Op::Leaf => {}
                Op::Param(pid) => {
                    let dst = params.get_mut(*pid).gradient.data_mut();
                    for (d, v) in dst.iter_mut().zip(&g) {
                        *d += v;
                    }
                }
                Op::MatMul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let (m, k) = va.dims2();
                    let n = vb.cols();
                    // The kernels accumulate, so write straight into the buffers.
                    if self.requires_grad[a.0] {
                        matmul_bt_into(&g, vb.data(), grad_buffer(&mut grads, *a, m * k), m, n, k);
                    }
                    if self.requires_grad[b.0] {
                        matmul_at_into(va.data(), &g, grad_buffer(&mut grads, *b, k * n), k, m, n);
                    }
                }
                Op::Transpose(a) => {
                    let (r, c) = node.value.dims2();
                    let t = Tensor::matrix(r, c, g).expect("grad shape").transpose();
                    accumulate(&mut grads, *a, t.data().to_vec());
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.iter().map(|v| -v).collect());
                    accumulate(&mut grads, *a, g);
                }
                Op::Mul(a, b) => {
                    let (va, vb) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let da = g.iter().zip(vb.data()).map(|(x, y)| x * y).collect();
                    let db = g.iter().zip(va.data()).map(|(x, y)| x * y).collect();
                    accumulate(&mut grads, *a, da);
                    accumulate(&mut grads, *b, db);
                }
                Op::AddRow(a, bias) => {
                    let n = self.nodes[bias.0].value.len();
                    let mut db = vec![0.0; n];
                    for chunk in g.chunks(n) {
                        for (d, v) in db.iter_mut().zip(chunk) {
                            *d += v;
                        }
                    }
                    accumulate(&mut grads, *bias, db);
                    accumulate(&mut grads, *a, g);
                }
                Op::Scale(a, s) => {
                    accumulate(&mut grads, *a, g.iter().map(|v| v * s).collect());
                }
                Op::Unary(kind, a) => {
                    let d = g
                        .iter()
                        .zip(node.value.data())
                        .map(|(gv, &y)| gv * kind.derivative(y))
                        .collect();
                    accumulate(&mut grads, *a, d);
                }
                Op::MaskedSoftmax(a) => {
                    let y = &node.value;
                    let (m, n) = y.dims2();
                    let mut d = vec![0.0; m * n];
                    for r in 0..m {
                        let yr = y.row(r);
                        let gr = &g[r * n..(r + 1) * n];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for c in 0..n {
                            d[r * n + c] = yr[c] * (gr[c] - dot);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::ConcatCols(parts) => {
                    let (m, total) = node.value.dims2();
                    let mut offset = 0;
                    for p in parts {
                        let c = self.nodes[p.0].value.cols();
                        if self.requires_grad[p.0] {
                            let mut d = Vec::with_capacity(m * c);
                            for r in 0..m {
                                d.extend_from_slice(&g[r * total + offset..r * total + offset + c]);
                            }
                            accumulate(&mut grads, *p, d);
                        }
                        offset += c;
                    }
                }
                Op::SliceCols(a, start) => {
                    let (m, n) = self.nodes[a.0].value.dims2();
                    let w = node.value.cols();
                    let d = grad_buffer(&mut grads, *a, m * n);
                    for r in 0..m {
                        let dst = &mut d[r * n + start..r * n + start + w];
                        for (x, v) in dst.iter_mut().zip(&g[r * w..(r + 1) * w]) {
                            *x += v;
                        }
                    }
                }
                Op::Row(a, r) => {
                    let n = node.value.len();
                    let len = self.nodes[a.0].value.len();
                    let d = grad_buffer(&mut grads, *a, len);
                    for (x, v) in d[r * n..(r + 1) * n].iter_mut().zip(&g) {
                        *x += v;
                    }
                }
                Op::StackRows(rows) => {
                    let n = node.value.cols();
                    for (i, r) in rows.iter().enumerate() {
                        accumulate(&mut grads, *r, g[i * n..(i + 1) * n].to_vec());
                    }
                }
                Op::BroadcastRows(a) => {
                    let n = node.value.cols();
                    let mut d = vec![0.0; n];
                    for chunk in g.chunks(n) {
                        for (x, v) in d.iter_mut().zip(chunk) {
                            *x += v;
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::MaskRows(a, keep) => {
                    let n = node.value.cols();
                    let mut d = g;
                    for (r, &k) in keep.iter().enumerate() {
                        if !k {
                            d[r * n..(r + 1) * n].fill(0.0);
                        }
                    }
                    accumulate(&mut grads, *a, d);
                }
                Op::Reshape(a) => {
                    accumulate(&mut grads, *a, g);
                }
                Op::Sum(a) => {
                    let n = self.nodes[a.0].value.len();
                    accumulate(&mut grads, *a, vec![g[0]; n]);
                }
                Op::EmbedMean(table, rows) => {
                    let dst = params.get_mut(*table);
                    let dim = dst.value.cols();
                    let gd = dst.gradient.data_mut();
                    for (r, list) in rows.iter().enumerate() {
                        if list.is_empty() {
                            continue;
                        }
                        let inv = 1.0 / list.len() as f64;
                        let gr = &g[r * dim..(r + 1) * dim];
                        for &k in list {
                            for (d, v) in gd[k * dim..(k + 1) * dim].iter_mut().zip(gr) {
                                *d += v * inv;
                            }
                        }
                    }
                }
                Op::CrossEntropy(a, gold) => {
                    let logits = self.nodes[a.0].value.data();
                    let lse = log_sum_exp(logits);
                    let mut d: Vec<f64> = logits.iter().map(|&z| (z - lse).exp() * g[0]).collect();
                    d[*gold] -= g[0];
                    accumulate(&mut grads, *a, d);
                }
            }
        }
        Ok(())
    }
}

/// The gradient buffer of `id`, created as zeros on first use, for
/// ops that write into a small part of a large input.
fn grad_buffer(grads: &mut [Option<Vec<f64>>], id: NodeId, len: usize) -> &mut Vec<f64> {
    grads[id.0].get_or_insert_with(|| vec![0.0; len])
}

fn accumulate(grads: &mut [Option<Vec<f64>>], id: NodeId, d: Vec<f64>) {
    match &mut grads[id.0] {
        Some(existing) => {
            for (e, v) in existing.iter_mut().zip(&d) {
                *e += v;
            }
        }
        slot @ None => *slot = Some(d),
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Value-only masked softmax, shared by the graph op and direct callers.
pub fn masked_softmax_values(logits: &Tensor, mask: &Tensor) -> Result<Tensor> {
    if logits.shape() != mask.shape() {
        return Err(shape_err("masked_softmax", logits, mask));
    }
    let (m, n) = logits.dims2();
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        let (lr, mr) = (logits.row(r), mask.row(r));
        let shifted: Vec<f64> = lr
            .iter()
            .zip(mr)
            .map(|(&l, &mk)| if is_masked(mk) { l + MASK_SENTINEL } else { l + mk })
            .collect();
        if mr.iter().all(|&mk| is_masked(mk)) {
            return Err(TensorError::DegenerateRow { row: r });
        }
        let max = shifted
            .iter()
            .zip(mr)
            .filter(|(_, &mk)| !is_masked(mk))
            .map(|(&s, _)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        let orow = &mut out[r * n..(r + 1) * n];
        let mut total = 0.0;
        for c in 0..n {
            if !is_masked(mr[c]) {
                orow[c] = (shifted[c] - max).exp();
                total += orow[c];
            }
        }
        orow.iter_mut().for_each(|v| *v /= total);
    }
    Tensor::finite(logits.shape(), out, "masked_softmax")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn softmax_single_unmasked_slot() {
        let y = masked_softmax_values(&t(&[2], &[1.0, 1.0]), &t(&[2], &[0.0, f64::NEG_INFINITY])).unwrap();
        assert_eq!(y.data(), &[1.0, 0.0]);
    }

    #[test]
    fn softmax_uniform_and_two_logit_cases() {
        let y = masked_softmax_values(&t(&[3], &[0.0; 3]), &t(&[3], &[0.0; 3])).unwrap();
        for v in y.data() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let y = masked_softmax_values(&t(&[2], &[2.0, 1.0]), &t(&[2], &[0.0, 0.0])).unwrap();
        // e^1 / (e^1 + 1) evaluated independently.
        let p = std::f64::consts::E / (std::f64::consts::E + 1.0);
        assert!((y.data()[0] - p).abs() < 1e-15);
        assert!((y.data()[0] - 0.73106).abs() < 1e-5);
        assert!((y.data()[1] - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn softmax_fully_masked_row_is_an_error() {
        let mask = t(&[2, 2], &[0.0, 0.0, f64::NEG_INFINITY, f64::NEG_INFINITY]);
        let err = masked_softmax_values(&t(&[2, 2], &[0.0; 4]), &mask).unwrap_err();
        assert_eq!(err, TensorError::DegenerateRow { row: 1 });
    }

    #[test]
    fn unary_examples() {
        let mut g = Graph::new();
        let x = g.constant(t(&[3], &[-1.0, 0.0, 2.0])).unwrap();
        let r = g.relu(x).unwrap();
        assert_eq!(g.value(r).data(), &[0.0, 0.0, 2.0]);
        let z = g.constant(t(&[1], &[0.0])).unwrap();
        let s = g.sigmoid(z).unwrap();
        assert_eq!(g.value(s).data(), &[0.5]);
        let one = g.constant(t(&[1], &[1.0])).unwrap();
        let th = g.tanh(one).unwrap();
        assert!((g.value(th).data()[0] - 0.76159).abs() < 1e-5);
        assert_eq!(g.value(th).data()[0], 1f64.tanh());
    }

    #[test]
    fn cross_entropy_examples() {
        let mut g = Graph::new();
        let u = g.constant(t(&[4], &[0.3; 4])).unwrap();
        let l = g.cross_entropy(u, 2).unwrap();
        assert!((g.value(l).data()[0] - 4f64.ln()).abs() < 1e-12);

        let s = g.constant(t(&[3], &[100.0, 0.0, 0.0])).unwrap();
        let l = g.cross_entropy(s, 0).unwrap();
        assert!(g.value(l).data()[0] < 1e-40);

        let b = g.constant(t(&[2], &[1.0, 0.0])).unwrap();
        let l = g.cross_entropy(b, 1).unwrap();
        let expected = -(1.0 / (std::f64::consts::E + 1.0)).ln();
        assert!((g.value(l).data()[0] - expected).abs() < 1e-12);
        assert!((g.value(l).data()[0] - 1.31326).abs() < 1e-5);

        assert!(matches!(g.cross_entropy(b, 2), Err(TensorError::Index { index: 2, len: 2 })));
    }

    #[test]
    fn linear_sum_gradient() {
        let mut ps = ParamSet::new();
        let w = ps.add("w", t(&[2, 2], &[0.5, -1.0, 2.0, 3.0]));
        let mut g = Graph::new();
        let wn = g.param(&ps, w);
        let x = g.constant(t(&[2, 1], &[1.0, 1.0])).unwrap();
        let y = g.matmul(wn, x).unwrap();
        let loss = g.sum(y).unwrap();
        g.backward(loss, &mut ps).unwrap();
        assert_eq!(ps.get(w).gradient.data(), &[1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn uniform_cross_entropy_gradient_sums_to_zero() {
        let mut ps = ParamSet::new();
        let z = ps.add("z", t(&[5], &[0.7; 5]));
        let mut g = Graph::new();
        let zn = g.param(&ps, z);
        let loss = g.cross_entropy(zn, 3).unwrap();
        g.backward(loss, &mut ps).unwrap();
        let grad = ps.get(z).gradient.data();
        assert!(grad.iter().sum::<f64>().abs() < 1e-15);
        assert!((grad[3] - (0.2 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn second_backward_is_stale() {
        let mut ps = ParamSet::new();
        let z = ps.add("z", t(&[2], &[1.0, 2.0]));
        let mut g = Graph::new();
        let zn = g.param(&ps, z);
        let loss = g.sum(zn).unwrap();
        g.backward(loss, &mut ps).unwrap();
        assert_eq!(g.backward(loss, &mut ps), Err(TensorError::StaleGraph));
    }

    #[test]
    fn backward_requires_scalar() {
        let mut ps = ParamSet::new();
        let z = ps.add("z", t(&[2], &[1.0, 2.0]));
        let mut g = Graph::new();
        let zn = g.param(&ps, z);
        assert!(matches!(g.backward(zn, &mut ps), Err(TensorError::NotScalar(_))));
    }

    #[test]
    fn mask_rows_blocks_gradient() {
        let mut ps = ParamSet::new();
        let z = ps.add("z", t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]));
        let mut g = Graph::new();
        let zn = g.param(&ps, z);
        let m = g.mask_rows(zn, &[false, true]).unwrap();
        assert_eq!(g.value(m).data(), &[0.0, 0.0, 3.0, 4.0]);
        let loss = g.sum(m).unwrap();
        g.backward(loss, &mut ps).unwrap();
        assert_eq!(ps.get(z).gradient.data(), &[0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn embed_mean_pools_and_scatters() {
        let mut ps = ParamSet::new();
        let e = ps.add("e", t(&[3, 2], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        let mut g = Graph::new();
        let pooled = g.embed_mean(&ps, e, vec![vec![0, 2], vec![], vec![1]]).unwrap();
        assert_eq!(g.value(pooled).data(), &[3.0, 4.0, 0.0, 0.0, 3.0, 4.0]);
        let loss = g.sum(pooled).unwrap();
        g.backward(loss, &mut ps).unwrap();
        assert_eq!(ps.get(e).gradient.data(), &[0.5, 0.5, 1.0, 1.0, 0.5, 0.5]);
    }
}
