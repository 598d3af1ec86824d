//! Tape-based reverse-mode differentiation over dense tensors.
//!
//! A [`Graph`] is an append-only list of nodes. Every operation pushes a new
//! node whose operands already exist, so node order is a topological order
//! and the backward pass is a single reverse sweep. Nodes whose operands do
//! not require gradients are stored as constants and never visited.
//!
//! Graphs are built per minibatch and dropped after [`Graph::backward`].

use crate::autodiff::tensor::{log_softmax_rows, matmul, softmax_rows, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    LogSoftmax(Var),
    Log(Var),
    Square(Var),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    GatherRows(Var, Vec<usize>),
    Pick(Var, Vec<usize>),
    ConcatCols(Vec<Var>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Computation tape.
#[derive(Debug, Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients produced by [`Graph::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`, or `None` if `v` does not
    /// influence the loss.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`; zeros when unreachable.
    pub fn wrt(&self, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.0]),
        }
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Registers a trainable leaf.
    pub fn param(&mut self, value: &Tensor) -> Var {
        self.push(value.clone(), Op::Leaf, true)
    }

    /// Registers a constant leaf; no gradient flows into it.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        // Constant subexpressions are folded into leaves.
        let op = if requires_grad { op } else { Op::Leaf };
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    fn any_grad(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(op, self.shape(a), self.shape(b)));
        }
        Ok(())
    }

    fn rank2(&self, op: &'static str, a: Var) -> Result<(usize, usize)> {
        let s = self.shape(a);
        match s {
            [r, c] => Ok((*r, *c)),
            _ => Err(Error::shape(op, s, &[0, 0])),
        }
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = matmul(self.value(a), self.value(b))?;
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let value = self.value(a).zip(self.value(b), |x, y| x + y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Add(a, b), rg))
    }

    /// Adds a `[n]` vector to every row of an `[m, n]` matrix.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (_, n) = self.rank2("add_row", a)?;
        if self.shape(row) != [n] {
            return Err(Error::shape("add_row", self.shape(a), self.shape(row)));
        }
        let r = self.value(row).data().to_vec();
        let mut value = self.value(a).clone();
        for chunk in value.data_mut().chunks_mut(n) {
            for (v, b) in chunk.iter_mut().zip(&r) {
                *v += b;
            }
        }
        let rg = self.any_grad(&[a, row]);
        Ok(self.push(value, Op::AddRow(a, row), rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let value = self.value(a).zip(self.value(b), |x, y| x - y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Sub(a, b), rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mul", a, b)?;
        let value = self.value(a).zip(self.value(b), |x, y| x * y);
        let rg = self.any_grad(&[a, b]);
        Ok(self.push(value, Op::Mul(a, b), rg))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x * c);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Scale(a, c), rg)
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a).map(|x| x + c);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::AddScalar(a), rg)
    }

    /// `1 - a`, used by GRU gating.
    pub fn one_minus(&mut self, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_scalar(neg, 1.0)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| 1.0 / (1.0 + (-x).exp()));
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sigmoid(a), rg)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::tanh);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Tanh(a), rg)
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, a: Var) -> Var {
        let value = softmax_rows(self.value(a));
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Softmax(a), rg)
    }

    pub fn log_softmax(&mut self, a: Var) -> Var {
        let value = log_softmax_rows(self.value(a));
        let rg = self.any_grad(&[a]);
        self.push(value, Op::LogSoftmax(a), rg)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).map(f64::ln);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Log(a), rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).map(|x| x * x);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Square(a), rg)
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = Tensor::scalar(self.value(a).data().iter().sum());
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Sum(a), rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let value = Tensor::scalar(t.data().iter().sum::<f64>() / t.len() as f64);
        let rg = self.any_grad(&[a]);
        self.push(value, Op::Mean(a), rg)
    }

    /// Sums the last axis: `[m, n] -> [m]`.
    pub fn sum_rows(&mut self, a: Var) -> Result<Var> {
        let (_, n) = self.rank2("sum_rows", a)?;
        let data = self
            .value(a)
            .data()
            .chunks(n.max(1))
            .map(|r| r.iter().sum())
            .collect();
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::vector(data), Op::SumRows(a), rg))
    }

    /// Row lookup: `table [v, e]`, indices of length `m` -> `[m, e]`.
    pub fn gather_rows(&mut self, table: Var, indices: &[usize]) -> Result<Var> {
        let (v, e) = self.rank2("gather_rows", table)?;
        let t = self.value(table);
        let mut data = Vec::with_capacity(indices.len() * e);
        for &i in indices {
            if i >= v {
                return Err(Error::IndexOutOfRange {
                    what: "gather_rows",
                    index: i,
                    size: v,
                });
            }
            data.extend_from_slice(t.row(i));
        }
        let value = Tensor::matrix(indices.len(), e, data)?;
        let rg = self.any_grad(&[table]);
        Ok(self.push(value, Op::GatherRows(table, indices.to_vec()), rg))
    }

    /// Selects one column per row: `a [m, n]`, `columns[i] < n` -> `[m]`.
    pub fn pick(&mut self, a: Var, columns: &[usize]) -> Result<Var> {
        let (m, n) = self.rank2("pick", a)?;
        if columns.len() != m {
            return Err(Error::shape("pick", self.shape(a), &[columns.len()]));
        }
        let t = self.value(a);
        let mut data = Vec::with_capacity(m);
        for (i, &c) in columns.iter().enumerate() {
            if c >= n {
                return Err(Error::IndexOutOfRange {
                    what: "pick",
                    index: c,
                    size: n,
                });
            }
            data.push(t.data()[i * n + c]);
        }
        let rg = self.any_grad(&[a]);
        Ok(self.push(Tensor::vector(data), Op::Pick(a, columns.to_vec()), rg))
    }

    /// Concatenates rank-2 tensors with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let first = *parts.first().ok_or(Error::Empty("concat operand list"))?;
        let (m, _) = self.rank2("concat_cols", first)?;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.rank2("concat_cols", p)?;
            if r != m {
                return Err(Error::shape("concat_cols", self.shape(first), self.shape(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(m * total);
        for i in 0..m {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let value = Tensor::matrix(m, total, data)?;
        let rg = self.any_grad(parts);
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let ls = self.shape(loss);
        if ls.iter().product::<usize>() != 1 {
            return Err(Error::NonScalarLoss(ls.to_vec()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let shapes = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        if !self.nodes[loss.0].requires_grad {
            return Ok(Gradients { grads, shapes });
        }
        grads[loss.0] = Some(Tensor::full(ls, 1.0));

        for idx in (0..=loss.0).rev() {
            let Some(upstream) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            self.propagate(node, &upstream, &mut grads);
            grads[idx] = Some(upstream);
        }
        Ok(Gradients { grads, shapes })
    }

    fn propagate(&self, node: &Node, up: &Tensor, grads: &mut [Option<Tensor>]) {
        let mut acc = |v: Var, g: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => existing.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (val(*a), val(*b));
                if self.nodes[a.0].requires_grad {
                    acc(*a, matmul(up, &bv.transpose()).expect("matmul grad shape"));
                }
                if self.nodes[b.0].requires_grad {
                    acc(*b, matmul(&av.transpose(), up).expect("matmul grad shape"));
                }
            }
            Op::Add(a, b) => {
                acc(*a, up.clone());
                acc(*b, up.clone());
            }
            Op::AddRow(a, row) => {
                acc(*a, up.clone());
                let n = up.cols();
                let mut g = vec![0.0; n];
                for chunk in up.data().chunks(n) {
                    for (s, v) in g.iter_mut().zip(chunk) {
                        *s += v;
                    }
                }
                acc(*row, Tensor::vector(g));
            }
            Op::Sub(a, b) => {
                acc(*a, up.clone());
                acc(*b, up.map(|x| -x));
            }
            Op::Mul(a, b) => {
                acc(*a, up.zip(val(*b), |g, y| g * y));
                acc(*b, up.zip(val(*a), |g, x| g * x));
            }
            Op::Scale(a, c) => acc(*a, up.map(|g| g * c)),
            Op::AddScalar(a) => acc(*a, up.clone()),
            Op::Sigmoid(a) => acc(*a, up.zip(&node.value, |g, y| g * y * (1.0 - y))),
            Op::Tanh(a) => acc(*a, up.zip(&node.value, |g, y| g * (1.0 - y * y))),
            Op::Softmax(a) => {
                let n = node.value.cols();
                let mut out = up.clone();
                for (orow, yrow) in out.data_mut().chunks_mut(n).zip(node.value.data().chunks(n)) {
                    let dot: f64 = orow.iter().zip(yrow).map(|(g, y)| g * y).sum();
                    for (o, y) in orow.iter_mut().zip(yrow) {
                        *o = y * (*o - dot);
                    }
                }
                acc(*a, out);
            }
            Op::LogSoftmax(a) => {
                let n = node.value.cols();
                let mut out = up.clone();
                for (orow, lrow) in out.data_mut().chunks_mut(n).zip(node.value.data().chunks(n)) {
                    let total: f64 = orow.iter().sum();
                    for (o, l) in orow.iter_mut().zip(lrow) {
                        *o -= l.exp() * total;
                    }
                }
                acc(*a, out);
            }
            Op::Log(a) => acc(*a, up.zip(val(*a), |g, x| g / x)),
            Op::Square(a) => acc(*a, up.zip(val(*a), |g, x| 2.0 * g * x)),
            Op::Sum(a) => acc(*a, Tensor::full(val(*a).shape(), up.item())),
            Op::Mean(a) => {
                let n = val(*a).len() as f64;
                acc(*a, Tensor::full(val(*a).shape(), up.item() / n));
            }
            Op::SumRows(a) => {
                let src = val(*a);
                let n = src.cols();
                let mut data = Vec::with_capacity(src.len());
                for &g in up.data() {
                    data.extend(std::iter::repeat_n(g, n));
                }
                acc(*a, Tensor::new(src.shape().to_vec(), data).expect("sum_rows grad"));
            }
            Op::GatherRows(table, indices) => {
                let t = val(*table);
                let e = t.cols();
                let mut g = Tensor::zeros(t.shape());
                for (r, &i) in indices.iter().enumerate() {
                    let dst = &mut g.data_mut()[i * e..(i + 1) * e];
                    for (d, s) in dst.iter_mut().zip(&up.data()[r * e..(r + 1) * e]) {
                        *d += s;
                    }
                }
                acc(*table, g);
            }
            Op::Pick(a, columns) => {
                let src = val(*a);
                let n = src.cols();
                let mut g = Tensor::zeros(src.shape());
                for (i, (&c, &u)) in columns.iter().zip(up.data()).enumerate() {
                    g.data_mut()[i * n + c] += u;
                }
                acc(*a, g);
            }
            Op::ConcatCols(parts) => {
                let m = up.rows();
                let total = up.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = val(p).cols();
                    let mut data = Vec::with_capacity(m * w);
                    for i in 0..m {
                        data.extend_from_slice(&up.data()[i * total + offset..i * total + offset + w]);
                    }
                    acc(p, Tensor::matrix(m, w, data).expect("concat grad"));
                    offset += w;
                }
            }
        }
    }
}
