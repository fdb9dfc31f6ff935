//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] is an append-only list of nodes. Every operation pushes one
//! node holding its forward value and the handles of its operands, so the
//! creation order is already a topological order and [`Tape::backward`]
//! simply walks the list in reverse.
//!
//! Binary elementwise operations broadcast their right operand: it may have
//! the full shape, a single row (`1 × c`), a single column (`r × 1`), or be
//! a scalar (`1 × 1`).

use std::sync::Arc;

use ndarray::{s, Array2, Axis, Zip};

use super::linalg;
use crate::error::{Error, Result};
use crate::par::Execution;

/// Default negative slope of [`Tape::leaky_relu`] across the crate.
pub const LEAKY_SLOPE: f64 = 0.01;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulNt(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Exp(Var),
    Log(Var),
    Sqrt(Var),
    Abs(Var),
    Square(Var),
    ConcatCols(Vec<Var>),
    SliceCols(Var, usize),
    Transpose(Var),
    MeanRows(Var),
    SumCols(Var),
    SumAll(Var),
    MeanAll(Var),
    /// Column-wise extremum over rows; stores the winning row per column.
    SelectRows(Var, Vec<usize>),
    PairwiseSum(Var, Var),
    MaskedSoftmax(Var),
}

/// One recorded value with its provenance.
#[derive(Debug, Clone)]
pub struct TensorNode {
    value: Array2<f64>,
    grad: Option<Array2<f64>>,
    requires_grad: bool,
    op: Op,
}

impl TensorNode {
    pub fn value(&self) -> &Array2<f64> {
        &self.value
    }

    pub fn grad(&self) -> Option<&Array2<f64>> {
        self.grad.as_ref()
    }

    pub fn requires_grad(&self) -> bool {
        self.requires_grad
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }
}

/// Records a computation for one forward/backward pass.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<TensorNode>,
    exec: Execution,
}

fn shape_err(op: &'static str, a: &Array2<f64>, b: &Array2<f64>) -> Error {
    Error::Shape {
        op,
        lhs: a.dim(),
        rhs: b.dim(),
    }
}

fn broadcastable(a: (usize, usize), b: (usize, usize)) -> bool {
    (b.0 == a.0 || b.0 == 1) && (b.1 == a.1 || b.1 == 1)
}

/// Sums `g` down to `shape`, undoing a broadcast.
fn reduce_to(g: &Array2<f64>, shape: (usize, usize)) -> Array2<f64> {
    let mut out = g.clone();
    if shape.0 == 1 && out.nrows() != 1 {
        out = out.sum_axis(Axis(0)).insert_axis(Axis(0));
    }
    if shape.1 == 1 && out.ncols() != 1 {
        out = out.sum_axis(Axis(1)).insert_axis(Axis(1));
    }
    out
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_execution(exec: Execution) -> Self {
        Self {
            nodes: Vec::new(),
            exec,
        }
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, v: Var) -> &TensorNode {
        &self.nodes[v.0]
    }

    pub fn value(&self, v: Var) -> &Array2<f64> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.dim()
    }

    /// Scalar value of a `1 × 1` node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn grad(&self, v: Var) -> Option<&Array2<f64>> {
        self.nodes[v.0].grad.as_ref()
    }

    fn push(&mut self, value: Array2<f64>, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(TensorNode {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Leaf, false)
    }

    fn unary(&mut self, a: Var, value: Array2<f64>, op: Op) -> Var {
        let rg = self.rg(a);
        self.push(value, op, rg)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.nrows() {
            return Err(shape_err("matmul", av, bv));
        }
        let value = linalg::matmul(av.view(), bv.view(), self.exec);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMul(a, b), rg))
    }

    /// `a · bᵀ`.
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.ncols() != bv.ncols() {
            return Err(shape_err("matmul_nt", av, bv));
        }
        let value = linalg::matmul(av.view(), bv.t(), self.exec);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, Op::MatMulNt(a, b), rg))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(&Array2<f64>, &Array2<f64>) -> Array2<f64>,
        op: Op,
    ) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if !broadcastable(av.dim(), bv.dim()) {
            return Err(shape_err(name, av, bv));
        }
        let value = f(av, bv);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(value, op, rg))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) * c;
        self.unary(a, value, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Var {
        let value = self.value(a) + c;
        self.unary(a, value, Op::AddScalar(a))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::tanh);
        self.unary(a, value, Op::Tanh(a))
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let value = self.value(a).mapv(|x| if x > 0.0 { x } else { slope * x });
        self.unary(a, value, Op::LeakyRelu(a, slope))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::exp);
        self.unary(a, value, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::ln);
        self.unary(a, value, Op::Log(a))
    }

    /// Square root. The derivative at exactly zero is taken as zero.
    pub fn sqrt(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::sqrt);
        self.unary(a, value, Op::Sqrt(a))
    }

    /// Absolute value with subgradient `sign(0) = 0`.
    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::abs);
        self.unary(a, value, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x * x);
        self.unary(a, value, Op::Square(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let Some(&first) = parts.first() else {
            return Err(Error::Contract("concat_cols of zero operands".into()));
        };
        let rows = self.value(first).nrows();
        for &p in parts {
            if self.value(p).nrows() != rows {
                return Err(shape_err("concat_cols", self.value(first), self.value(p)));
            }
        }
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("row counts checked");
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(value, Op::ConcatCols(parts.to_vec()), rg))
    }

    /// Columns `start..end` of `a`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var> {
        let av = self.value(a);
        if start >= end || end > av.ncols() {
            return Err(Error::Shape {
                op: "slice_cols",
                lhs: av.dim(),
                rhs: (start, end),
            });
        }
        let value = av.slice(s![.., start..end]).to_owned();
        Ok(self.unary(a, value, Op::SliceCols(a, start)))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let value = self.value(a).t().to_owned();
        self.unary(a, value, Op::Transpose(a))
    }

    /// Column means, `r × c → 1 × c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = av.sum_axis(Axis(0)).insert_axis(Axis(0)) / av.nrows() as f64;
        self.unary(a, value, Op::MeanRows(a))
    }

    /// Per-row sums, `r × c → r × 1`.
    pub fn sum_cols(&mut self, a: Var) -> Var {
        let value = self.value(a).sum_axis(Axis(1)).insert_axis(Axis(1));
        self.unary(a, value, Op::SumCols(a))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let value = Array2::from_elem((1, 1), self.value(a).sum());
        self.unary(a, value, Op::SumAll(a))
    }

    pub fn mean_all(&mut self, a: Var) -> Var {
        let av = self.value(a);
        let value = Array2::from_elem((1, 1), av.sum() / av.len() as f64);
        self.unary(a, value, Op::MeanAll(a))
    }

    fn select_rows(&mut self, a: Var, pick_max: bool) -> Var {
        let av = self.value(a);
        let mut idx = Vec::with_capacity(av.ncols());
        let mut value = Array2::zeros((1, av.ncols()));
        for (j, col) in av.axis_iter(Axis(1)).enumerate() {
            let mut best = 0;
            for (i, &x) in col.iter().enumerate() {
                let better = if pick_max { x > col[best] } else { x < col[best] };
                if better {
                    best = i;
                }
            }
            idx.push(best);
            value[[0, j]] = col[best];
        }
        self.unary(a, value, Op::SelectRows(a, idx))
    }

    /// Column-wise maximum over rows, `r × c → 1 × c`.
    pub fn max_rows(&mut self, a: Var) -> Var {
        self.select_rows(a, true)
    }

    /// Column-wise minimum over rows, `r × c → 1 × c`.
    pub fn min_rows(&mut self, a: Var) -> Var {
        self.select_rows(a, false)
    }

    /// `out[i][j] = u[i] + v[j]` for column vectors `u` (`r × 1`) and `v` (`m × 1`).
    pub fn pairwise_sum(&mut self, u: Var, v: Var) -> Result<Var> {
        let (uv, vv) = (self.value(u), self.value(v));
        if uv.ncols() != 1 || vv.ncols() != 1 {
            return Err(shape_err("pairwise_sum", uv, vv));
        }
        let value = Array2::from_shape_fn((uv.nrows(), vv.nrows()), |(i, j)| uv[[i, 0]] + vv[[j, 0]]);
        let rg = self.rg(u) || self.rg(v);
        Ok(self.push(value, Op::PairwiseSum(u, v), rg))
    }

    /// Row-wise softmax restricted to `mask`; entries outside the mask are 0.
    ///
    /// Every row must have at least one masked-in entry.
    pub fn row_softmax_over_neighbors(&mut self, a: Var, mask: &Arc<Array2<bool>>) -> Result<Var> {
        let av = self.value(a);
        if av.dim() != mask.dim() {
            return Err(Error::Shape {
                op: "row_softmax_over_neighbors",
                lhs: av.dim(),
                rhs: mask.dim(),
            });
        }
        let mut value = Array2::<f64>::zeros(av.dim());
        for (i, (row, mrow)) in av.outer_iter().zip(mask.outer_iter()).enumerate() {
            let mut max = f64::NEG_INFINITY;
            for (&x, &m) in row.iter().zip(mrow.iter()) {
                if m && x > max {
                    max = x;
                }
            }
            if max == f64::NEG_INFINITY {
                return Err(Error::Contract(format!("softmax row {i} has an empty neighborhood")));
            }
            let mut total = 0.0;
            let mut out = value.row_mut(i);
            for ((o, &x), &m) in out.iter_mut().zip(row.iter()).zip(mrow.iter()) {
                if m {
                    *o = (x - max).exp();
                    total += *o;
                }
            }
            out.mapv_inplace(|v| v / total);
        }
        Ok(self.unary(a, value, Op::MaskedSoftmax(a)))
    }

    /// Clears all stored gradients.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.grad = None;
        }
    }

    /// Populates gradients of every `requires_grad` ancestor of a scalar loss.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(Error::Contract(format!(
                "backward requires a 1x1 loss, got {}x{}",
                shape.0, shape.1
            )));
        }
        let mut grads: Vec<Option<Array2<f64>>> = vec![None; loss.0 + 1];
        if self.rg(loss) {
            grads[loss.0] = Some(Array2::ones((1, 1)));
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        for (node, g) in self.nodes.iter_mut().zip(grads) {
            if node.requires_grad {
                node.grad = Some(g.unwrap_or_else(|| Array2::zeros(node.value.dim())));
            }
        }
        Ok(())
    }

    fn propagate(&self, i: usize, g: &Array2<f64>, grads: &mut [Option<Array2<f64>>]) {
        let node = &self.nodes[i];
        let mut acc = |v: Var, contrib: Array2<f64>| {
            if !self.rg(v) {
                return;
            }
            match &mut grads[v.0] {
                Some(existing) => *existing += &contrib,
                slot @ None => *slot = Some(contrib),
            }
        };
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.rg(*a) {
                    acc(*a, linalg::matmul(g.view(), val(*b).t(), self.exec));
                }
                if self.rg(*b) {
                    acc(*b, linalg::matmul(val(*a).t(), g.view(), self.exec));
                }
            }
            Op::MatMulNt(a, b) => {
                if self.rg(*a) {
                    acc(*a, linalg::matmul(g.view(), val(*b).view(), self.exec));
                }
                if self.rg(*b) {
                    acc(*b, linalg::matmul(g.t(), val(*a).view(), self.exec));
                }
            }
            Op::Add(a, b) => {
                acc(*a, g.clone());
                acc(*b, reduce_to(g, val(*b).dim()));
            }
            Op::Sub(a, b) => {
                acc(*a, g.clone());
                acc(*b, -reduce_to(g, val(*b).dim()));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    acc(*a, g * val(*b));
                }
                if self.rg(*b) {
                    acc(*b, reduce_to(&(g * val(*a)), val(*b).dim()));
                }
            }
            Op::Div(a, b) => {
                let bv = val(*b);
                if self.rg(*a) {
                    acc(*a, g / bv);
                }
                if self.rg(*b) {
                    let full = -(g * &node.value) / bv;
                    acc(*b, reduce_to(&full, bv.dim()));
                }
            }
            Op::Scale(a, c) => acc(*a, g * *c),
            Op::AddScalar(a) => acc(*a, g.clone()),
            Op::Tanh(a) => acc(*a, g * &node.value.mapv(|y| 1.0 - y * y)),
            Op::LeakyRelu(a, slope) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(val(*a)).for_each(|d, &x| {
                    if x <= 0.0 {
                        *d *= slope;
                    }
                });
                acc(*a, d);
            }
            Op::Exp(a) => acc(*a, g * &node.value),
            Op::Log(a) => acc(*a, g / val(*a)),
            Op::Sqrt(a) => {
                let mut d = g.clone();
                Zip::from(&mut d).and(&node.value).for_each(|d, &y| {
                    *d = if y > 0.0 { *d * 0.5 / y } else { 0.0 };
                });
                acc(*a, d);
            }
            Op::Abs(a) => acc(*a, g * &val(*a).mapv(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 })),
            Op::Square(a) => acc(*a, g * &(val(*a) * 2.0)),
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = val(p).ncols();
                    if self.rg(p) {
                        acc(p, g.slice(s![.., start..start + w]).to_owned());
                    }
                    start += w;
                }
            }
            Op::SliceCols(a, start) => {
                let mut d = Array2::zeros(val(*a).dim());
                d.slice_mut(s![.., *start..*start + g.ncols()]).assign(g);
                acc(*a, d);
            }
            Op::Transpose(a) => acc(*a, g.t().to_owned()),
            Op::MeanRows(a) => {
                let r = val(*a).nrows();
                let d = g.broadcast(val(*a).dim()).expect("1 x c broadcasts").to_owned() / r as f64;
                acc(*a, d);
            }
            Op::SumCols(a) => {
                let d = g.broadcast(val(*a).dim()).expect("r x 1 broadcasts").to_owned();
                acc(*a, d);
            }
            Op::SumAll(a) => acc(*a, Array2::from_elem(val(*a).dim(), g[[0, 0]])),
            Op::MeanAll(a) => {
                let av = val(*a);
                acc(*a, Array2::from_elem(av.dim(), g[[0, 0]] / av.len() as f64));
            }
            Op::SelectRows(a, idx) => {
                let mut d = Array2::zeros(val(*a).dim());
                for (j, &r) in idx.iter().enumerate() {
                    d[[r, j]] = g[[0, j]];
                }
                acc(*a, d);
            }
            Op::PairwiseSum(u, v) => {
                acc(*u, g.sum_axis(Axis(1)).insert_axis(Axis(1)));
                acc(*v, g.sum_axis(Axis(0)).insert_axis(Axis(1)));
            }
            Op::MaskedSoftmax(a) => {
                let y = &node.value;
                let dot = (g * y).sum_axis(Axis(1)).insert_axis(Axis(1));
                acc(*a, y * &(g - &dot));
            }
        }
    }
}
