use super::kernels;
use super::Tensor;
use crate::error::{Error, Result};

/// Norm at or below which a row cannot be normalized.
pub(crate) const NORM_EPS: f64 = 1e-12;

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Matmul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Shift(Var),
    Relu(Var),
    Swish(Var),
    Exp(Var),
    Log(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    LogSumExpRows(Var),
    Diag(Var),
    Concat(Vec<Var>, usize),
    Slice {
        x: Var,
        axis: usize,
        start: usize,
        end: usize,
    },
    L2Norm(Var),
    NormalizeRows(Var),
    Dot(Var, Var),
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Ordered record of primitive evaluations.
///
/// Nodes are appended in evaluation order, so every node's inputs precede it.
/// With gradients disabled the tape computes the same values with the same
/// code but marks every result as not requiring gradients.
#[derive(Debug, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    grad_enabled: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        lhs: a.shape().to_vec(),
        rhs: b.shape().to_vec(),
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matrix_dims(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::ShapeMismatch {
            op,
            lhs: other.to_vec(),
            rhs: vec![],
        }),
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: true,
        }
    }

    /// A tape that evaluates primitives without recording gradient flow.
    pub fn without_grad() -> Self {
        Tape {
            nodes: Vec::new(),
            grad_enabled: false,
        }
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input tensor. Its own `requires_grad` flag is honoured only
    /// when the tape has gradients enabled.
    pub fn leaf(&mut self, mut value: Tensor) -> Var {
        value.requires_grad &= self.grad_enabled;
        value.grad = None;
        self.push(value, Op::Leaf)
    }

    /// Records a trainable input.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value.with_requires_grad(true))
    }

    /// Records an input that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn item(&self, v: Var) -> Result<f64> {
        self.value(v).item()
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].value.requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, shape: Vec<usize>, data: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let requires = self.grad_enabled && inputs.iter().any(|&v| self.requires(v));
        let value = Tensor {
            shape,
            data,
            requires_grad: requires,
            grad: None,
        };
        self.push(value, op)
    }

    fn unary_map(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Var {
        let t = self.value(x);
        let data = t.data().iter().map(|&v| f(v)).collect();
        let shape = t.shape().to_vec();
        self.record(shape, data, op, &[x])
    }

    /// Matrix product `a[m,k] · b[k,n]`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        let (m, k) = matrix_dims("matmul", ta)?;
        let (k2, n) = matrix_dims("matmul", tb)?;
        if k != k2 {
            return Err(mismatch("matmul", ta, tb));
        }
        let data = kernels::matmul(m, k, n, ta.data(), tb.data());
        Ok(self.record(vec![m, n], data, Op::Matmul(a, b), &[a, b]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (r, c) = matrix_dims("transpose", t)?;
        let src = t.data();
        let mut data = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                data[j * r + i] = src[i * c + j];
            }
        }
        Ok(self.record(vec![c, r], data, Op::Transpose(x), &[x]))
    }

    /// Elementwise sum of equal shapes, or a `[n,k] + [k]` bias add.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            let data = ta
                .data()
                .iter()
                .zip(tb.data())
                .map(|(x, y)| x + y)
                .collect();
            let shape = ta.shape().to_vec();
            return Ok(self.record(shape, data, Op::Add(a, b), &[a, b]));
        }
        match (ta.shape(), tb.shape()) {
            ([n, k], [k2]) if k == k2 => {
                let (n, k) = (*n, *k);
                let bias = tb.data();
                let mut data = ta.data().to_vec();
                for row in data.chunks_exact_mut(k) {
                    row.iter_mut().zip(bias).for_each(|(x, b)| *x += b);
                }
                Ok(self.record(vec![n, k], data, Op::AddBias(a, b), &[a, b]))
            }
            _ => Err(mismatch("add", ta, tb)),
        }
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("sub", ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x - y)
            .collect();
        let shape = ta.shape().to_vec();
        Ok(self.record(shape, data, Op::Sub(a, b), &[a, b]))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("mul", ta, tb));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(x, y)| x * y)
            .collect();
        let shape = ta.shape().to_vec();
        Ok(self.record(shape, data, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        self.unary_map(x, Op::Scale(x, factor), |v| v * factor)
    }

    /// Adds a constant to every element.
    pub fn shift(&mut self, x: Var, offset: f64) -> Var {
        self.unary_map(x, Op::Shift(x), |v| v + offset)
    }

    /// `max(x, 0)`, with derivative 0 at the kink.
    pub fn relu(&mut self, x: Var) -> Var {
        self.unary_map(x, Op::Relu(x), |v| if v > 0.0 { v } else { 0.0 })
    }

    /// `x · sigmoid(x)`.
    pub fn swish(&mut self, x: Var) -> Var {
        self.unary_map(x, Op::Swish(x), |v| v * sigmoid(v))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary_map(x, Op::Exp(x), f64::exp)
    }

    /// Natural logarithm; every element must be strictly positive.
    pub fn log(&mut self, x: Var) -> Result<Var> {
        if let Some((index, &value)) = self
            .value(x)
            .data()
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0))
        {
            return Err(Error::Domain {
                op: "log",
                index,
                value,
            });
        }
        Ok(self.unary_map(x, Op::Log(x), f64::ln))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        self.record(vec![], vec![s], Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let s: f64 = t.data().iter().sum();
        let m = s / t.len() as f64;
        self.record(vec![], vec![m], Op::Mean(x), &[x])
    }

    /// Row sums of a matrix: `[n,k] -> [n]`.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (n, k) = matrix_dims("sum_rows", t)?;
        let data = t.data().chunks_exact(k).map(|r| r.iter().sum()).collect();
        Ok(self.record(vec![n], data, Op::SumRows(x), &[x]))
    }

    /// Row-wise `log Σ_j exp(x_ij)`, evaluated with a max shift.
    pub fn log_sum_exp_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (n, k) = matrix_dims("log_sum_exp_rows", t)?;
        let data = t
            .data()
            .chunks_exact(k)
            .map(|r| {
                let mx = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                mx + r.iter().map(|v| (v - mx).exp()).sum::<f64>().ln()
            })
            .collect();
        Ok(self.record(vec![n], data, Op::LogSumExpRows(x), &[x]))
    }

    /// Main diagonal of a square matrix.
    pub fn diag(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (n, c) = matrix_dims("diag", t)?;
        if n != c {
            return Err(mismatch("diag", t, t));
        }
        let data = (0..n).map(|i| t.data()[i * n + i]).collect();
        Ok(self.record(vec![n], data, Op::Diag(x), &[x]))
    }

    /// Concatenation along `axis`: axis 0 for any rank (trailing extents
    /// must agree), axis 1 for matrices with equal row counts.
    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let first = match xs.first() {
            Some(&v) => self.value(v),
            None => return Err(Error::contract("concat of zero tensors")),
        };
        let (shape, data) = match axis {
            0 => {
                let tail = first.shape().get(1..).unwrap_or(&[]).to_vec();
                let mut lead = 0;
                let mut data = Vec::new();
                for &v in xs {
                    let t = self.value(v);
                    if t.rank() == 0 || t.shape()[1..] != tail[..] {
                        return Err(mismatch("concat", first, t));
                    }
                    lead += t.shape()[0];
                    data.extend_from_slice(t.data());
                }
                let mut shape = vec![lead];
                shape.extend(tail);
                (shape, data)
            }
            1 => {
                let (rows, _) = matrix_dims("concat", first)?;
                let mut widths = Vec::with_capacity(xs.len());
                for &v in xs {
                    let t = self.value(v);
                    match t.shape() {
                        [r, c] if *r == rows => widths.push(*c),
                        _ => return Err(mismatch("concat", first, t)),
                    }
                }
                let total: usize = widths.iter().sum();
                let mut data = Vec::with_capacity(rows * total);
                for i in 0..rows {
                    for (&v, &w) in xs.iter().zip(&widths) {
                        data.extend_from_slice(&self.value(v).data()[i * w..(i + 1) * w]);
                    }
                }
                (vec![rows, total], data)
            }
            _ => {
                return Err(Error::contract(format!(
                    "concat along unsupported axis {axis}"
                )))
            }
        };
        Ok(self.record(shape, data, Op::Concat(xs.to_vec(), axis), xs))
    }

    /// `x[start..end]` along axis 0 (any rank) or axis 1 (matrices).
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, end: usize) -> Result<Var> {
        let t = self.value(x);
        let extent = t.shape().get(axis).copied();
        if extent.is_none_or(|e| start >= end || end > e) || axis > 1 {
            return Err(Error::contract(format!(
                "slice {start}..{end} along axis {axis} of shape {:?}",
                t.shape()
            )));
        }
        let (shape, data) = if axis == 0 {
            let inner: usize = t.shape()[1..].iter().product();
            let mut shape = t.shape().to_vec();
            shape[0] = end - start;
            (shape, t.data()[start * inner..end * inner].to_vec())
        } else {
            let (r, c) = matrix_dims("slice", t)?;
            let mut data = Vec::with_capacity(r * (end - start));
            for i in 0..r {
                data.extend_from_slice(&t.data()[i * c + start..i * c + end]);
            }
            (vec![r, end - start], data)
        };
        Ok(self.record(
            shape,
            data,
            Op::Slice {
                x,
                axis,
                start,
                end,
            },
            &[x],
        ))
    }

    /// Euclidean norm: a scalar for vectors, one norm per row for matrices.
    pub fn l2_norm(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (shape, data) = match t.shape() {
            [_] => (
                vec![],
                vec![t.data().iter().map(|v| v * v).sum::<f64>().sqrt()],
            ),
            [n, k] => (
                vec![*n],
                t.data()
                    .chunks_exact(*k)
                    .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
                    .collect(),
            ),
            other => {
                return Err(Error::ShapeMismatch {
                    op: "l2_norm",
                    lhs: other.to_vec(),
                    rhs: vec![],
                })
            }
        };
        Ok(self.record(shape, data, Op::L2Norm(x), &[x]))
    }

    /// Scales every row of a matrix to unit Euclidean norm.
    pub fn normalize_rows(&mut self, x: Var) -> Result<Var> {
        let t = self.value(x);
        let (n, k) = matrix_dims("normalize_rows", t)?;
        let mut data = t.data().to_vec();
        for (i, row) in data.chunks_exact_mut(k).enumerate() {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm > NORM_EPS) {
                return Err(Error::DegenerateVector { index: i, norm });
            }
            row.iter_mut().for_each(|v| *v /= norm);
        }
        Ok(self.record(vec![n, k], data, Op::NormalizeRows(x), &[x]))
    }

    /// Inner product of two equal-length vectors.
    pub fn dot(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.rank() != 1 || ta.shape() != tb.shape() {
            return Err(mismatch("dot", ta, tb));
        }
        let s = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).sum();
        Ok(self.record(vec![], vec![s], Op::Dot(a, b), &[a, b]))
    }

    /// Reverse pass from a scalar root.
    ///
    /// Gradients are added into the `grad` buffer of every node that requires
    /// one, so repeated calls accumulate. Returns the number of recorded
    /// operations whose backward rule ran.
    pub fn backward(&mut self, root: Var) -> Result<usize> {
        let root_value = &self.nodes[root.0].value;
        if !root_value.is_scalar() {
            return Err(Error::contract(format!(
                "backward needs a scalar root, got shape {:?}",
                root_value.shape()
            )));
        }
        if !root_value.requires_grad {
            return Ok(0);
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; root.0 + 1];
        grads[root.0] = Some(vec![1.0]);
        let mut visited = 0;
        for idx in (0..=root.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            if !matches!(self.nodes[idx].op, Op::Leaf) {
                visited += 1;
                self.propagate(idx, &g, &mut grads);
            }
            self.nodes[idx].value.accumulate_grad(g);
        }
        Ok(visited)
    }

    /// Clears the gradient buffers of every node.
    pub fn zero_grad(&mut self) {
        self.nodes.iter_mut().for_each(|n| n.value.zero_grad());
    }

    fn propagate(&self, idx: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.value.data();
        let mut send = |v: Var, contrib: &dyn Fn(&mut [f64])| {
            if !self.requires(v) {
                return;
            }
            let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
            contrib(slot);
        };
        match &node.op {
            Op::Leaf => {}
            Op::Matmul(a, b) => {
                let (m, k) = self.value(*a).dims2().expect("matmul lhs");
                let n = self.value(*b).cols();
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &|s| kernels::acc_matmul_nt(m, n, k, g, bd, s));
                send(*b, &|s| kernels::acc_matmul_tn(m, k, n, ad, g, s));
            }
            Op::Transpose(x) => {
                let (r, c) = self.value(*x).dims2().expect("transpose input");
                send(*x, &|s| {
                    for i in 0..r {
                        for j in 0..c {
                            s[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                send(*a, &|s| add_into(s, g));
                send(*b, &|s| add_into(s, g));
            }
            Op::AddBias(a, b) => {
                let k = self.value(*b).len();
                send(*a, &|s| add_into(s, g));
                send(*b, &|s| {
                    for row in g.chunks_exact(k) {
                        add_into(s, row);
                    }
                });
            }
            Op::Sub(a, b) => {
                send(*a, &|s| add_into(s, g));
                send(*b, &|s| s.iter_mut().zip(g).for_each(|(s, g)| *s -= g));
            }
            Op::Mul(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &|s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * bd[i];
                    }
                });
                send(*b, &|s| {
                    for i in 0..s.len() {
                        s[i] += g[i] * ad[i];
                    }
                });
            }
            Op::Scale(x, f) => send(*x, &|s| s.iter_mut().zip(g).for_each(|(s, g)| *s += g * f)),
            Op::Shift(x) => send(*x, &|s| add_into(s, g)),
            Op::Relu(x) => {
                let xd = self.value(*x).data();
                send(*x, &|s| {
                    for i in 0..s.len() {
                        if xd[i] > 0.0 {
                            s[i] += g[i];
                        }
                    }
                });
            }
            Op::Swish(x) => {
                let xd = self.value(*x).data();
                send(*x, &|s| {
                    for i in 0..s.len() {
                        let sg = sigmoid(xd[i]);
                        s[i] += g[i] * (sg + xd[i] * sg * (1.0 - sg));
                    }
                });
            }
            Op::Exp(x) => send(*x, &|s| {
                for i in 0..s.len() {
                    s[i] += g[i] * out[i];
                }
            }),
            Op::Log(x) => {
                let xd = self.value(*x).data();
                send(*x, &|s| {
                    for i in 0..s.len() {
                        s[i] += g[i] / xd[i];
                    }
                });
            }
            Op::Sum(x) => send(*x, &|s| s.iter_mut().for_each(|s| *s += g[0])),
            Op::Mean(x) => {
                let n = self.value(*x).len() as f64;
                send(*x, &|s| s.iter_mut().for_each(|s| *s += g[0] / n));
            }
            Op::SumRows(x) => {
                let k = self.value(*x).cols();
                send(*x, &|s| {
                    for (row, gi) in s.chunks_exact_mut(k).zip(g) {
                        row.iter_mut().for_each(|v| *v += gi);
                    }
                });
            }
            Op::LogSumExpRows(x) => {
                let xt = self.value(*x);
                let k = xt.cols();
                send(*x, &|s| {
                    for (i, (row, xr)) in s
                        .chunks_exact_mut(k)
                        .zip(xt.data().chunks_exact(k))
                        .enumerate()
                    {
                        for (sv, xv) in row.iter_mut().zip(xr) {
                            *sv += g[i] * (xv - out[i]).exp();
                        }
                    }
                });
            }
            Op::Diag(x) => {
                let n = g.len();
                send(*x, &|s| {
                    for i in 0..n {
                        s[i * n + i] += g[i];
                    }
                });
            }
            Op::Concat(xs, axis) => {
                if *axis == 0 {
                    let mut offset = 0;
                    for &v in xs {
                        let len = self.value(v).len();
                        send(v, &|s| add_into(s, &g[offset..offset + len]));
                        offset += len;
                    }
                } else {
                    let rows = node.value.rows();
                    let total = node.value.cols();
                    let mut col = 0;
                    for &v in xs {
                        let w = self.value(v).cols();
                        send(v, &|s| {
                            for i in 0..rows {
                                add_into(
                                    &mut s[i * w..(i + 1) * w],
                                    &g[i * total + col..i * total + col + w],
                                );
                            }
                        });
                        col += w;
                    }
                }
            }
            Op::Slice {
                x,
                axis,
                start,
                end,
            } => {
                let xt = self.value(*x);
                if *axis == 0 {
                    let inner: usize = xt.shape()[1..].iter().product();
                    send(*x, &|s| add_into(&mut s[start * inner..end * inner], g));
                } else {
                    let (r, c) = xt.dims2().expect("slice input");
                    let w = end - start;
                    send(*x, &|s| {
                        for i in 0..r {
                            add_into(&mut s[i * c + start..i * c + end], &g[i * w..(i + 1) * w]);
                        }
                    });
                }
            }
            Op::L2Norm(x) => {
                let xt = self.value(*x);
                let k = if xt.rank() == 1 { xt.len() } else { xt.cols() };
                send(*x, &|s| {
                    for (i, (row, xr)) in s
                        .chunks_exact_mut(k)
                        .zip(xt.data().chunks_exact(k))
                        .enumerate()
                    {
                        if out[i] > 0.0 {
                            for (sv, xv) in row.iter_mut().zip(xr) {
                                *sv += g[i] * xv / out[i];
                            }
                        }
                    }
                });
            }
            Op::NormalizeRows(x) => {
                let xt = self.value(*x);
                let k = xt.cols();
                send(*x, &|s| {
                    for (i, row) in s.chunks_exact_mut(k).enumerate() {
                        let xr = &xt.data()[i * k..(i + 1) * k];
                        let yr = &out[i * k..(i + 1) * k];
                        let gr = &g[i * k..(i + 1) * k];
                        let norm = xr.iter().map(|v| v * v).sum::<f64>().sqrt();
                        let proj: f64 = yr.iter().zip(gr).map(|(y, g)| y * g).sum();
                        for j in 0..k {
                            row[j] += (gr[j] - yr[j] * proj) / norm;
                        }
                    }
                });
            }
            Op::Dot(a, b) => {
                let (ad, bd) = (self.value(*a).data(), self.value(*b).data());
                send(*a, &|s| {
                    s.iter_mut().zip(bd).for_each(|(s, b)| *s += g[0] * b)
                });
                send(*b, &|s| {
                    s.iter_mut().zip(ad).for_each(|(s, a)| *s += g[0] * a)
                });
            }
        }
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: Vec<usize>, data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).unwrap()
    }

    #[test]
    fn swish_at_zero_is_zero() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::scalar(0.0));
        let y = tape.swish(x);
        assert_eq!(tape.item(y).unwrap(), 0.0);
    }

    #[test]
    fn identity_matmul_returns_rhs() {
        let mut tape = Tape::new();
        let i3 = tape.constant(Tensor::identity(3).unwrap());
        let a_data: Vec<f64> = (0..12).map(|v| v as f64 * 0.5 - 2.0).collect();
        let a = tape.constant(t(vec![3, 4], a_data.clone()));
        let c = tape.matmul(i3, a).unwrap();
        assert_eq!(tape.value(c).data(), &a_data[..]);
        assert_eq!(tape.value(c).shape(), &[3, 4]);
    }

    #[test]
    fn dot_matches_scalar_loop() {
        let (u, v) = ([1.0, 2.0, 3.0], [4.0, 5.0, 6.0]);
        let mut oracle = 0.0;
        for i in 0..3 {
            oracle += u[i] * v[i];
        }
        assert_eq!(oracle, 32.0);
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::vector(u.to_vec()).unwrap());
        let b = tape.constant(Tensor::vector(v.to_vec()).unwrap());
        let d = tape.dot(a, b).unwrap();
        assert_eq!(tape.item(d).unwrap(), oracle);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let mut tape = Tape::new();
        let a = tape.constant(Tensor::zeros(vec![2, 3]).unwrap());
        let b = tape.constant(Tensor::zeros(vec![2, 3]).unwrap());
        match tape.matmul(a, b) {
            Err(Error::ShapeMismatch { op, lhs, rhs }) => {
                assert_eq!(op, "matmul");
                assert_eq!(lhs, vec![2, 3]);
                assert_eq!(rhs, vec![2, 3]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn log_rejects_non_positive() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::vector(vec![1.0, 0.0, 2.0]).unwrap());
        assert!(matches!(
            tape.log(x),
            Err(Error::Domain {
                op: "log",
                index: 1,
                ..
            })
        ));
    }

    #[test]
    fn backward_of_sum_is_all_ones() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::zeros(vec![2, 3]).unwrap());
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[1.0; 6]);
    }

    #[test]
    fn backward_of_self_dot() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let d = tape.dot(x, x).unwrap();
        tape.backward(d).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[2.0, 4.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let y = tape.exp(x);
        assert!(matches!(tape.backward(y), Err(Error::Contract(_))));
    }

    #[test]
    fn backward_visits_each_op_once() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![0.3, -0.7]).unwrap());
        let a = tape.exp(x);
        let b = tape.swish(x);
        let c = tape.add(a, b).unwrap();
        let s = tape.sum(c);
        assert_eq!(tape.backward(s).unwrap(), 4);
    }

    #[test]
    fn constants_receive_no_gradient() {
        let mut tape = Tape::new();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let c = tape.constant(Tensor::vector(vec![3.0, 4.0]).unwrap());
        let d = tape.dot(x, c).unwrap();
        tape.backward(d).unwrap();
        assert_eq!(tape.grad(x).unwrap(), &[3.0, 4.0]);
        assert!(tape.grad(c).is_none());
    }

    #[test]
    fn normalize_rows_flags_zero_row() {
        let mut tape = Tape::new();
        let x = tape.constant(t(vec![2, 2], vec![1.0, 1.0, 0.0, 0.0]));
        assert!(matches!(
            tape.normalize_rows(x),
            Err(Error::DegenerateVector { index: 1, .. })
        ));
    }

    #[test]
    fn no_grad_tape_marks_nothing() {
        let mut tape = Tape::without_grad();
        let x = tape.param(Tensor::vector(vec![1.0, 2.0]).unwrap());
        let y = tape.sum(x);
        assert!(!tape.value(y).requires_grad());
        assert_eq!(tape.backward(y).unwrap(), 0);
    }

    #[test]
    fn concat_and_slice_round_trip() {
        let mut tape = Tape::new();
        let a = tape.constant(t(vec![2, 1], vec![1.0, 2.0]));
        let b = tape.constant(t(vec![2, 2], vec![3.0, 4.0, 5.0, 6.0]));
        let c = tape.concat(&[a, b], 1).unwrap();
        assert_eq!(tape.value(c).data(), &[1.0, 3.0, 4.0, 2.0, 5.0, 6.0]);
        let s = tape.slice(c, 1, 1, 3).unwrap();
        assert_eq!(tape.value(s), tape.value(b));
        let r = tape.concat(&[a, a], 0).unwrap();
        assert_eq!(tape.value(r).shape(), &[4, 1]);
    }
}
