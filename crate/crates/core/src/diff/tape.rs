//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! Every operation evaluates eagerly and appends a node holding its value
//! and its inputs. Nodes are appended after their inputs, so walking the
//! node list backwards visits each node once, after all of its consumers.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicU32, Ordering};

use super::{DiffError, Tensor};
use crate::math;

static NEXT_TAPE: AtomicU32 = AtomicU32::new(1);

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var {
    tape: u32,
    index: u32,
}

impl Var {
    pub fn index(self) -> usize {
        self.index as usize
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    Tanh(Var),
    Softplus(Var),
    Exp(Var),
    Log(Var),
    Log1p(Var),
    Clamp(Var, f64, f64),
    Sum(Var),
    RowSum(Var),
    SliceCols(Var, usize),
    ConcatCols(Var, Var),
    GaussianLogpdf(Var, Var, Var),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug)]
pub struct Tape {
    id: u32,
    nodes: Vec<Node>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

fn check_shape(op: &'static str, ok: bool, lhs: &Tensor, rhs: &Tensor) -> Result<(), DiffError> {
    if ok {
        Ok(())
    } else {
        Err(DiffError::Shape { op, lhs: lhs.shape(), rhs: rhs.shape() })
    }
}

impl Tape {
    pub fn new() -> Self {
        Self { id: NEXT_TAPE.fetch_add(1, Ordering::Relaxed), nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        let index = self.nodes.len() as u32;
        self.nodes.push(Node { value, op, requires_grad });
        Var { tape: self.id, index }
    }

    fn node(&self, v: Var) -> Result<&Node, DiffError> {
        if v.tape != self.id {
            return Err(DiffError::ForeignVar);
        }
        self.nodes.get(v.index()).ok_or(DiffError::ForeignVar)
    }

    fn record(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var, DiffError> {
        if !value.is_finite() {
            return Err(DiffError::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|&v| self.nodes[v.index()].requires_grad);
        Ok(self.push(value, op, requires_grad))
    }

    /// A differentiable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// A leaf that never receives a gradient.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Value of a recorded variable. Panics if `v` belongs to another tape.
    pub fn value(&self, v: Var) -> &Tensor {
        &self.node(v).expect("variable recorded on this tape").value
    }

    /// `a · b`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ta, tb) = (&self.node(a)?.value, &self.node(b)?.value);
        check_shape("matmul", ta.cols() == tb.rows(), ta, tb)?;
        let value = ta.matmul(tb);
        self.record("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    /// `a · bᵀ`; with `a` a batch of row vectors this applies the linear map `b`.
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ta, tb) = (&self.node(a)?.value, &self.node(b)?.value);
        check_shape("matmul_t", ta.cols() == tb.cols(), ta, tb)?;
        let value = ta.matmul_t(tb);
        self.record("matmul_t", value, Op::MatMulT(a, b), &[a, b])
    }

    /// Batch of rows `x` through the masked map: `x · (w ⊙ m)ᵀ`.
    pub fn masked_matmul(&mut self, w: Var, m: Var, x: Var) -> Result<Var, DiffError> {
        let masked = self.mul(w, m)?;
        self.matmul_t(x, masked)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.transpose();
        self.record("transpose", value, Op::Transpose(a), &[a])
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<(), DiffError> {
        let (ta, tb) = (&self.node(a)?.value, &self.node(b)?.value);
        check_shape(op, ta.shape() == tb.shape(), ta, tb)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("add", a, b)?;
        let value = self.nodes[a.index()].value.add(&self.nodes[b.index()].value);
        self.record("add", value, Op::Add(a, b), &[a, b])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("sub", a, b)?;
        let value = self.nodes[a.index()].value.sub(&self.nodes[b.index()].value);
        self.record("sub", value, Op::Sub(a, b), &[a, b])
    }

    /// Element-wise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        self.same_shape("mul", a, b)?;
        let value = self.nodes[a.index()].value.hadamard(&self.nodes[b.index()].value);
        self.record("mul", value, Op::Mul(a, b), &[a, b])
    }

    /// Adds a `1 x cols` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var, DiffError> {
        let (ta, tr) = (&self.node(a)?.value, &self.node(row)?.value);
        check_shape("add_row", tr.shape() == (1, ta.cols()), ta, tr)?;
        let value = ta.add_row(tr);
        self.record("add_row", value, Op::AddRow(a, row), &[a, row])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.scale(s);
        self.record("scale", value, Op::Scale(a, s), &[a])
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(|v| v + s);
        self.record("add_scalar", value, Op::AddScalar(a), &[a])
    }

    pub fn neg(&mut self, a: Var) -> Result<Var, DiffError> {
        self.scale(a, -1.0)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(math::tanh);
        self.record("tanh", value, Op::Tanh(a), &[a])
    }

    pub fn softplus(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(math::softplus);
        self.record("softplus", value, Op::Softplus(a), &[a])
    }

    pub fn exp(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(math::exp);
        self.record("exp", value, Op::Exp(a), &[a])
    }

    pub fn log(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(math::ln);
        self.record("log", value, Op::Log(a), &[a])
    }

    pub fn log1p(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(math::ln_1p);
        self.record("log1p", value, Op::Log1p(a), &[a])
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.map(|v| v.clamp(lo, hi));
        self.record("clamp", value, Op::Clamp(a, lo, hi), &[a])
    }

    /// Sum of all entries, as a `1 x 1` tensor.
    pub fn sum(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = Tensor::scalar(self.node(a)?.value.sum());
        self.record("sum", value, Op::Sum(a), &[a])
    }

    /// Mean of all entries.
    pub fn mean(&mut self, a: Var) -> Result<Var, DiffError> {
        let n = self.node(a)?.value.len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    /// Per-row sums, as a `rows x 1` column.
    pub fn row_sum(&mut self, a: Var) -> Result<Var, DiffError> {
        let value = self.node(a)?.value.row_sums();
        self.record("row_sum", value, Op::RowSum(a), &[a])
    }

    /// Columns `[start, end)`.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, DiffError> {
        let ta = &self.node(a)?.value;
        if start > end || end > ta.cols() {
            return Err(DiffError::Shape { op: "slice_cols", lhs: ta.shape(), rhs: (start, end) });
        }
        let value = ta.slice_cols(start, end);
        self.record("slice_cols", value, Op::SliceCols(a, start), &[a])
    }

    pub fn concat_cols(&mut self, a: Var, b: Var) -> Result<Var, DiffError> {
        let (ta, tb) = (&self.node(a)?.value, &self.node(b)?.value);
        check_shape("concat_cols", ta.rows() == tb.rows(), ta, tb)?;
        let value = ta.concat_cols(tb);
        self.record("concat_cols", value, Op::ConcatCols(a, b), &[a, b])
    }

    /// Element-wise `log N(x; mu, exp(log_sigma)^2)`.
    pub fn gaussian_logpdf(&mut self, x: Var, mu: Var, log_sigma: Var) -> Result<Var, DiffError> {
        self.same_shape("gaussian_logpdf", x, mu)?;
        self.same_shape("gaussian_logpdf", x, log_sigma)?;
        let (tx, tm, ts) = (&self.nodes[x.index()].value, &self.nodes[mu.index()].value, &self.nodes[log_sigma.index()].value);
        let data = tx.data().iter().zip(tm.data()).zip(ts.data()).map(|((&x, &m), &s)| math::gaussian_logpdf(x, m, s)).collect();
        let value = Tensor::from_vec(tx.rows(), tx.cols(), data);
        self.record("gaussian_logpdf", value, Op::GaussianLogpdf(x, mu, log_sigma), &[x, mu, log_sigma])
    }

    /// Reverse sweep from a scalar output.
    pub fn backward(&self, output: Var) -> Result<Gradients, DiffError> {
        let out = self.node(output)?;
        if out.value.shape() != (1, 1) {
            return Err(DiffError::NotScalar { shape: out.value.shape() });
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.index()] = Some(Tensor::scalar(1.0));

        for i in (0..=output.index()).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
            grads[i] = Some(g);
        }
        Ok(Gradients { tape: self.id, grads })
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: Var| &self.nodes[v.index()].value;
        let mut acc = |v: Var, contribution: Tensor| {
            if !self.nodes[v.index()].requires_grad {
                return;
            }
            match &mut grads[v.index()] {
                Some(existing) => existing.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        let wants = |v: Var| self.nodes[v.index()].requires_grad;

        match node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if wants(a) {
                    acc(a, g.matmul_t(val(b)));
                }
                if wants(b) {
                    acc(b, val(a).t_matmul(g));
                }
            }
            Op::MatMulT(a, b) => {
                if wants(a) {
                    acc(a, g.matmul(val(b)));
                }
                if wants(b) {
                    acc(b, g.t_matmul(val(a)));
                }
            }
            Op::Transpose(a) => acc(a, g.transpose()),
            Op::Add(a, b) => {
                acc(a, g.clone());
                acc(b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(a, g.clone());
                acc(b, g.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if wants(a) {
                    acc(a, g.hadamard(val(b)));
                }
                if wants(b) {
                    acc(b, g.hadamard(val(a)));
                }
            }
            Op::AddRow(a, row) => {
                acc(a, g.clone());
                if wants(row) {
                    acc(row, g.col_sums());
                }
            }
            Op::Scale(a, s) => acc(a, g.scale(s)),
            Op::AddScalar(a) => acc(a, g.clone()),
            Op::Tanh(a) => acc(a, g.zip_map(&node.value, |g, y| g * (1.0 - y * y))),
            Op::Softplus(a) => acc(a, g.zip_map(val(a), |g, x| g * math::sigmoid(x))),
            Op::Exp(a) => acc(a, g.hadamard(&node.value)),
            Op::Log(a) => acc(a, g.zip_map(val(a), |g, x| g / x)),
            Op::Log1p(a) => acc(a, g.zip_map(val(a), |g, x| g / (1.0 + x))),
            Op::Clamp(a, lo, hi) => acc(a, g.zip_map(val(a), |g, x| if x >= lo && x <= hi { g } else { 0.0 })),
            Op::Sum(a) => {
                let t = val(a);
                acc(a, Tensor::filled(t.rows(), t.cols(), g.get(0, 0)));
            }
            Op::RowSum(a) => {
                let t = val(a);
                acc(a, Tensor::from_fn(t.rows(), t.cols(), |r, _| g.get(r, 0)));
            }
            Op::SliceCols(a, start) => {
                let t = val(a);
                let w = g.cols();
                acc(a, Tensor::from_fn(t.rows(), t.cols(), |r, c| if c >= start && c < start + w { g.get(r, c - start) } else { 0.0 }));
            }
            Op::ConcatCols(a, b) => {
                let split = val(a).cols();
                if wants(a) {
                    acc(a, g.slice_cols(0, split));
                }
                if wants(b) {
                    acc(b, g.slice_cols(split, g.cols()));
                }
            }
            Op::GaussianLogpdf(x, mu, ls) => {
                // r = (x - mu) e^{-ls};  dy/dx = -r e^{-ls}, dy/dmu = r e^{-ls}, dy/dls = r^2 - 1
                let (tx, tm, ts) = (val(x), val(mu), val(ls));
                let n = tx.len();
                let mut dx = alloc::vec![0.0; n];
                let mut dls = alloc::vec![0.0; n];
                for i in 0..n {
                    let inv = math::exp(-ts.data()[i]);
                    let r = (tx.data()[i] - tm.data()[i]) * inv;
                    dx[i] = -g.data()[i] * r * inv;
                    dls[i] = g.data()[i] * (r * r - 1.0);
                }
                let (rows, cols) = tx.shape();
                let dx = Tensor::from_vec(rows, cols, dx);
                if wants(mu) {
                    acc(mu, dx.scale(-1.0));
                }
                if wants(ls) {
                    acc(ls, Tensor::from_vec(rows, cols, dls));
                }
                acc(x, dx);
            }
        }
    }
}

/// Result of [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    tape: u32,
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient with respect to `v`, `None` if nothing flowed into it.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        if v.tape != self.tape {
            return None;
        }
        self.grads.get(v.index()).and_then(Option::as_ref)
    }

    /// Gradient with respect to `v`, zeros of the variable's shape when
    /// nothing flowed into it.
    pub fn wrt(&self, tape: &Tape, v: Var) -> Tensor {
        match self.get(v) {
            Some(g) => g.clone(),
            None => {
                let (r, c) = tape.value(v).shape();
                Tensor::zeros(r, c)
            }
        }
    }
}
