//! Minimal reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation as a node in an append-only list, so
//! operands always precede their results and a single reverse sweep yields
//! the gradient of a scalar root with respect to every recorded node.
//!
//! Two value kinds live on the same tape:
//!
//! * scalar nodes ([`Var`]) cover the trajectory losses, one primitive per
//!   node with its local partials stored at record time;
//! * matrix nodes ([`MatVar`]) are fused dense ops (matmul, bias, relu, mean
//!   BCE) used for the MLP, where a per-element graph would be wasteful.
//!
//! Nodes that do not depend on any gradient-requiring leaf are marked as such
//! and skipped during the backward sweep, which keeps frozen network weights
//! free of cost when only input gradients are wanted.
//!
//! A tape is meant to be short lived: build one per optimizer iteration and
//! drop it (or [`Tape::reset`] it) afterwards.

use std::cell::RefCell;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use ndarray::{Array2, Axis};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AutodiffError {
    #[error("sqrt of negative input {0}")]
    NegativeSqrt(f64),
    #[error("operands were recorded on different tapes")]
    TapeMismatch,
    #[error("{op} expects {expected} operand(s), got {got}")]
    Arity {
        op: ScalarOp,
        expected: usize,
        got: usize,
    },
    #[error("{0} produced a non-finite value")]
    NonFinite(&'static str),
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },
}

/// Scalar primitives available to [`Tape::record`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarOp {
    Add,
    Mul,
    Sub,
    Div,
    Neg,
    Square,
    Sqrt,
    Relu,
    Softplus,
    /// Binary cross entropy on a raw logit; operands are `(logit, label)`.
    BceWithLogits,
    Sin,
    Cos,
    /// `atan2(y, x)`; operands are `(y, x)`.
    Atan2,
}

impl ScalarOp {
    pub fn arity(self) -> usize {
        match self {
            ScalarOp::Add
            | ScalarOp::Mul
            | ScalarOp::Sub
            | ScalarOp::Div
            | ScalarOp::BceWithLogits
            | ScalarOp::Atan2 => 2,
            _ => 1,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ScalarOp::Add => "add",
            ScalarOp::Mul => "mul",
            ScalarOp::Sub => "sub",
            ScalarOp::Div => "div",
            ScalarOp::Neg => "neg",
            ScalarOp::Square => "square",
            ScalarOp::Sqrt => "sqrt",
            ScalarOp::Relu => "relu",
            ScalarOp::Softplus => "softplus",
            ScalarOp::BceWithLogits => "bce_with_logits",
            ScalarOp::Sin => "sin",
            ScalarOp::Cos => "cos",
            ScalarOp::Atan2 => "atan2",
        }
    }
}

impl fmt::Display for ScalarOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `ln(1 + e^x)` without overflow for large `|x|`.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Logistic function, stable for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `-[y ln σ(x) + (1 - y) ln(1 - σ(x))]` in the stable logit form.
pub fn bce_with_logits(logit: f64, label: f64) -> f64 {
    logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p()
}

#[derive(Debug, Clone)]
enum Value {
    Scalar(f64),
    Matrix(Array2<f64>),
}

impl Value {
    fn scalar(&self) -> f64 {
        match self {
            Value::Scalar(v) => *v,
            Value::Matrix(_) => panic!("expected scalar node"),
        }
    }

    fn matrix(&self) -> &Array2<f64> {
        match self {
            Value::Matrix(m) => m,
            Value::Scalar(_) => panic!("expected matrix node"),
        }
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// Scalar primitive with up to two operands and their local partials.
    Scalar {
        operands: [usize; 2],
        partials: [f64; 2],
        arity: u8,
    },
    MatMul(usize, usize),
    AddRowBias(usize, usize),
    MatRelu(usize),
    /// Rows of scalar nodes packed into a matrix.
    Stack(Vec<usize>),
    /// Scalar read of one matrix element.
    Element(usize, usize, usize),
    /// Mean BCE-with-logits of a `(n, 1)` logit column against fixed labels.
    BceMean(usize, Vec<f64>),
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Value,
    requires_grad: bool,
}

/// Append-only record of operations.
#[derive(Default)]
pub struct Tape {
    nodes: RefCell<Vec<Node>>,
}

impl fmt::Debug for Tape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tape").field("len", &self.len()).finish()
    }
}

/// Scalar handle into a [`Tape`].
#[derive(Clone, Copy)]
pub struct Var<'t> {
    tape: &'t Tape,
    index: usize,
    value: f64,
}

impl fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Var(#{} = {})", self.index, self.value)
    }
}

/// Matrix handle into a [`Tape`].
#[derive(Clone, Copy)]
pub struct MatVar<'t> {
    tape: &'t Tape,
    index: usize,
    shape: (usize, usize),
}

impl fmt::Debug for MatVar<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatVar(#{} {:?})", self.index, self.shape)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every node. Requires exclusive access, so no handle can outlive it.
    pub fn reset(&mut self) {
        self.nodes.get_mut().clear();
    }

    fn push(&self, node: Node) -> usize {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(node);
        nodes.len() - 1
    }

    fn owns(&self, other: &Tape) -> bool {
        std::ptr::eq(self, other)
    }

    fn leaf_scalar(&self, value: f64, requires_grad: bool) -> Var<'_> {
        assert!(value.is_finite(), "non-finite leaf value {value}");
        let index = self.push(Node {
            op: Op::Leaf,
            value: Value::Scalar(value),
            requires_grad,
        });
        Var {
            tape: self,
            index,
            value,
        }
    }

    /// Differentiable scalar leaf. Panics on a non-finite value.
    pub fn var(&self, value: f64) -> Var<'_> {
        self.leaf_scalar(value, true)
    }

    /// Scalar leaf that never receives a gradient.
    pub fn constant(&self, value: f64) -> Var<'_> {
        self.leaf_scalar(value, false)
    }

    fn leaf_matrix(&self, value: Array2<f64>, requires_grad: bool) -> MatVar<'_> {
        assert!(
            value.iter().all(|v| v.is_finite()),
            "non-finite entry in matrix leaf"
        );
        let shape = value.dim();
        let index = self.push(Node {
            op: Op::Leaf,
            value: Value::Matrix(value),
            requires_grad,
        });
        MatVar {
            tape: self,
            index,
            shape,
        }
    }

    pub fn matrix_var(&self, value: Array2<f64>) -> MatVar<'_> {
        self.leaf_matrix(value, true)
    }

    pub fn matrix_constant(&self, value: Array2<f64>) -> MatVar<'_> {
        self.leaf_matrix(value, false)
    }

    /// Records one scalar primitive.
    pub fn record<'t>(&'t self, op: ScalarOp, operands: &[Var<'t>]) -> Result<Var<'t>, AutodiffError> {
        if operands.len() != op.arity() {
            return Err(AutodiffError::Arity {
                op,
                expected: op.arity(),
                got: operands.len(),
            });
        }
        if operands.iter().any(|v| !self.owns(v.tape)) {
            return Err(AutodiffError::TapeMismatch);
        }
        let a = operands[0].value;
        let b = operands.get(1).map_or(0.0, |v| v.value);
        let (value, partials) = match op {
            ScalarOp::Add => (a + b, [1.0, 1.0]),
            ScalarOp::Sub => (a - b, [1.0, -1.0]),
            ScalarOp::Mul => (a * b, [b, a]),
            ScalarOp::Div => (a / b, [1.0 / b, -a / (b * b)]),
            ScalarOp::Neg => (-a, [-1.0, 0.0]),
            ScalarOp::Square => (a * a, [2.0 * a, 0.0]),
            ScalarOp::Sqrt => {
                if a < 0.0 {
                    return Err(AutodiffError::NegativeSqrt(a));
                }
                let r = a.sqrt();
                // subgradient 0 at the origin keeps zero-length norms finite
                let d = if r > 0.0 { 0.5 / r } else { 0.0 };
                (r, [d, 0.0])
            }
            ScalarOp::Relu => {
                if a > 0.0 {
                    (a, [1.0, 0.0])
                } else {
                    (0.0, [0.0, 0.0])
                }
            }
            ScalarOp::Softplus => (softplus(a), [sigmoid(a), 0.0]),
            ScalarOp::BceWithLogits => (bce_with_logits(a, b), [sigmoid(a) - b, -a]),
            ScalarOp::Sin => (a.sin(), [a.cos(), 0.0]),
            ScalarOp::Cos => (a.cos(), [-a.sin(), 0.0]),
            ScalarOp::Atan2 => {
                let r2 = a * a + b * b;
                if r2 > 0.0 {
                    (a.atan2(b), [b / r2, -a / r2])
                } else {
                    (a.atan2(b), [0.0, 0.0])
                }
            }
        };
        if !value.is_finite() || !partials.iter().all(|p| p.is_finite()) {
            return Err(AutodiffError::NonFinite(op.name()));
        }
        let nodes_req = {
            let nodes = self.nodes.borrow();
            operands.iter().any(|v| nodes[v.index].requires_grad)
        };
        let index = self.push(Node {
            op: Op::Scalar {
                operands: [operands[0].index, operands.get(1).map_or(0, |v| v.index)],
                partials,
                arity: op.arity() as u8,
            },
            value: Value::Scalar(value),
            requires_grad: nodes_req,
        });
        Ok(Var {
            tape: self,
            index,
            value,
        })
    }

    fn requires(&self, index: usize) -> bool {
        self.nodes.borrow()[index].requires_grad
    }

    fn check_owner(&self, other: &Tape) -> Result<(), AutodiffError> {
        if self.owns(other) {
            Ok(())
        } else {
            Err(AutodiffError::TapeMismatch)
        }
    }

    fn push_matrix(&self, op: Op, value: Array2<f64>, requires_grad: bool) -> MatVar<'_> {
        let shape = value.dim();
        let index = self.push(Node {
            op,
            value: Value::Matrix(value),
            requires_grad,
        });
        MatVar {
            tape: self,
            index,
            shape,
        }
    }

    /// `a · w` for `a: (n, k)` and `w: (k, m)`.
    pub fn matmul<'t>(&'t self, a: MatVar<'t>, w: MatVar<'t>) -> Result<MatVar<'t>, AutodiffError> {
        self.check_owner(a.tape)?;
        self.check_owner(w.tape)?;
        if a.shape.1 != w.shape.0 {
            return Err(AutodiffError::Shape {
                op: "matmul",
                lhs: a.shape,
                rhs: w.shape,
            });
        }
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.index].value.matrix().dot(nodes[w.index].value.matrix())
        };
        let req = self.requires(a.index) || self.requires(w.index);
        Ok(self.push_matrix(Op::MatMul(a.index, w.index), value, req))
    }

    /// Adds a `(1, m)` bias row to every row of `a`.
    pub fn add_row_bias<'t>(&'t self, a: MatVar<'t>, bias: MatVar<'t>) -> Result<MatVar<'t>, AutodiffError> {
        self.check_owner(a.tape)?;
        self.check_owner(bias.tape)?;
        if bias.shape.0 != 1 || bias.shape.1 != a.shape.1 {
            return Err(AutodiffError::Shape {
                op: "add_row_bias",
                lhs: a.shape,
                rhs: bias.shape,
            });
        }
        let value = {
            let nodes = self.nodes.borrow();
            nodes[a.index].value.matrix() + nodes[bias.index].value.matrix()
        };
        let req = self.requires(a.index) || self.requires(bias.index);
        Ok(self.push_matrix(Op::AddRowBias(a.index, bias.index), value, req))
    }

    pub fn relu_matrix<'t>(&'t self, a: MatVar<'t>) -> Result<MatVar<'t>, AutodiffError> {
        self.check_owner(a.tape)?;
        let value = self.nodes.borrow()[a.index]
            .value
            .matrix()
            .mapv(|v| v.max(0.0));
        let req = self.requires(a.index);
        Ok(self.push_matrix(Op::MatRelu(a.index), value, req))
    }

    /// Packs `rows.len()` rows of scalars into a matrix.
    pub fn stack<'t>(&'t self, rows: &[Vec<Var<'t>>]) -> Result<MatVar<'t>, AutodiffError> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut indices = Vec::with_capacity(rows.len() * cols);
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(AutodiffError::Shape {
                    op: "stack",
                    lhs: (1, cols),
                    rhs: (1, row.len()),
                });
            }
            for v in row {
                self.check_owner(v.tape)?;
                indices.push(v.index);
                values.push(v.value);
            }
        }
        let req = {
            let nodes = self.nodes.borrow();
            indices.iter().any(|&i| nodes[i].requires_grad)
        };
        let value = Array2::from_shape_vec((rows.len(), cols), values).expect("shape checked");
        Ok(self.push_matrix(Op::Stack(indices), value, req))
    }

    /// Scalar view of `a[row, col]`.
    pub fn element<'t>(&'t self, a: MatVar<'t>, row: usize, col: usize) -> Result<Var<'t>, AutodiffError> {
        self.check_owner(a.tape)?;
        if row >= a.shape.0 || col >= a.shape.1 {
            return Err(AutodiffError::Shape {
                op: "element",
                lhs: a.shape,
                rhs: (row, col),
            });
        }
        let (value, req) = {
            let nodes = self.nodes.borrow();
            let node = &nodes[a.index];
            (node.value.matrix()[[row, col]], node.requires_grad)
        };
        let index = self.push(Node {
            op: Op::Element(a.index, row, col),
            value: Value::Scalar(value),
            requires_grad: req,
        });
        Ok(Var {
            tape: self,
            index,
            value,
        })
    }

    /// Mean BCE-with-logits of a logit column against `labels`.
    pub fn bce_mean<'t>(&'t self, logits: MatVar<'t>, labels: &[f64]) -> Result<Var<'t>, AutodiffError> {
        self.check_owner(logits.tape)?;
        if logits.shape.1 != 1 || logits.shape.0 != labels.len() || labels.is_empty() {
            return Err(AutodiffError::Shape {
                op: "bce_mean",
                lhs: logits.shape,
                rhs: (labels.len(), 1),
            });
        }
        let (value, req) = {
            let nodes = self.nodes.borrow();
            let node = &nodes[logits.index];
            let m = node.value.matrix();
            let sum: f64 = m
                .column(0)
                .iter()
                .zip(labels)
                .map(|(&x, &y)| bce_with_logits(x, y))
                .sum();
            (sum / labels.len() as f64, node.requires_grad)
        };
        if !value.is_finite() {
            return Err(AutodiffError::NonFinite("bce_mean"));
        }
        let index = self.push(Node {
            op: Op::BceMean(logits.index, labels.to_vec()),
            value: Value::Scalar(value),
            requires_grad: req,
        });
        Ok(Var {
            tape: self,
            index,
            value,
        })
    }

    pub fn matrix_value(&self, m: MatVar<'_>) -> Array2<f64> {
        self.nodes.borrow()[m.index].value.matrix().clone()
    }

    /// Reverse sweep from a scalar root.
    ///
    /// The tape is not modified, so repeated calls return identical results.
    pub fn backward(&self, root: Var<'_>) -> Gradients {
        assert!(self.owns(root.tape), "root belongs to another tape");
        let nodes = self.nodes.borrow();
        let mut grads: Vec<Option<Value>> = vec![None; root.index + 1];
        grads[root.index] = Some(Value::Scalar(1.0));

        for index in (0..=root.index).rev() {
            let Some(g) = grads[index].take() else {
                continue;
            };
            let node = &nodes[index];
            if !node.requires_grad {
                grads[index] = Some(g);
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Scalar {
                    operands,
                    partials,
                    arity,
                } => {
                    let gs = g.scalar();
                    for k in 0..*arity as usize {
                        let target = operands[k];
                        if nodes[target].requires_grad {
                            accumulate_scalar(&mut grads[target], gs * partials[k]);
                        }
                    }
                }
                Op::MatMul(a, w) => {
                    let gm = g.matrix();
                    if nodes[*a].requires_grad {
                        let da = gm.dot(&nodes[*w].value.matrix().t());
                        accumulate_matrix(&mut grads[*a], da);
                    }
                    if nodes[*w].requires_grad {
                        let dw = nodes[*a].value.matrix().t().dot(gm);
                        accumulate_matrix(&mut grads[*w], dw);
                    }
                }
                Op::AddRowBias(a, bias) => {
                    let gm = g.matrix();
                    if nodes[*bias].requires_grad {
                        let db = gm.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate_matrix(&mut grads[*bias], db);
                    }
                    if nodes[*a].requires_grad {
                        accumulate_matrix(&mut grads[*a], gm.clone());
                    }
                }
                Op::MatRelu(a) => {
                    if nodes[*a].requires_grad {
                        let mut da = g.matrix().clone();
                        da.zip_mut_with(nodes[*a].value.matrix(), |d, &x| {
                            if x <= 0.0 {
                                *d = 0.0;
                            }
                        });
                        accumulate_matrix(&mut grads[*a], da);
                    }
                }
                Op::Stack(indices) => {
                    let gm = g.matrix();
                    for (&target, &gv) in indices.iter().zip(gm.iter()) {
                        if nodes[target].requires_grad {
                            accumulate_scalar(&mut grads[target], gv);
                        }
                    }
                }
                Op::Element(a, row, col) => {
                    if nodes[*a].requires_grad {
                        let shape = nodes[*a].value.matrix().dim();
                        let slot = &mut grads[*a];
                        if slot.is_none() {
                            *slot = Some(Value::Matrix(Array2::zeros(shape)));
                        }
                        if let Some(Value::Matrix(m)) = slot {
                            m[[*row, *col]] += g.scalar();
                        }
                    }
                }
                Op::BceMean(logits, labels) => {
                    if nodes[*logits].requires_grad {
                        let gs = g.scalar();
                        let n = labels.len() as f64;
                        let x = nodes[*logits].value.matrix();
                        let mut d = Array2::zeros(x.dim());
                        for ((dv, &xv), &y) in d.iter_mut().zip(x.iter()).zip(labels) {
                            *dv = gs * (sigmoid(xv) - y) / n;
                        }
                        accumulate_matrix(&mut grads[*logits], d);
                    }
                }
            }
            grads[index] = Some(g);
        }
        Gradients { grads }
    }
}

fn accumulate_scalar(slot: &mut Option<Value>, g: f64) {
    match slot {
        Some(Value::Scalar(v)) => *v += g,
        None => *slot = Some(Value::Scalar(g)),
        Some(Value::Matrix(_)) => unreachable!("scalar gradient into matrix node"),
    }
}

fn accumulate_matrix(slot: &mut Option<Value>, g: Array2<f64>) {
    match slot {
        Some(Value::Matrix(m)) => *m += &g,
        None => *slot = Some(Value::Matrix(g)),
        Some(Value::Scalar(_)) => unreachable!("matrix gradient into scalar node"),
    }
}

/// Gradient of a root with respect to every node on its tape.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Value>>,
}

impl Gradients {
    /// `∂root/∂v`, zero when `v` does not reach the root.
    pub fn wrt(&self, v: Var<'_>) -> f64 {
        self.get(v.index)
    }

    /// Scalar gradient by raw node index.
    pub fn get(&self, index: usize) -> f64 {
        match self.grads.get(index) {
            Some(Some(Value::Scalar(g))) => *g,
            _ => 0.0,
        }
    }

    pub fn wrt_matrix(&self, m: MatVar<'_>) -> Array2<f64> {
        match self.grads.get(m.index) {
            Some(Some(Value::Matrix(g))) => g.clone(),
            _ => Array2::zeros(m.shape),
        }
    }
}

impl<'t> Var<'t> {
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn tape(&self) -> &'t Tape {
        self.tape
    }

    fn unary(self, op: ScalarOp) -> Var<'t> {
        self.tape
            .record(op, &[self])
            .unwrap_or_else(|e| panic!("{e}"))
    }

    fn binary(self, op: ScalarOp, other: Var<'t>) -> Var<'t> {
        self.tape
            .record(op, &[self, other])
            .unwrap_or_else(|e| panic!("{e}"))
    }

    pub fn square(self) -> Var<'t> {
        self.unary(ScalarOp::Square)
    }

    /// Panics on a negative operand; use [`Tape::record`] for the checked form.
    pub fn sqrt(self) -> Var<'t> {
        self.unary(ScalarOp::Sqrt)
    }

    pub fn relu(self) -> Var<'t> {
        self.unary(ScalarOp::Relu)
    }

    pub fn softplus(self) -> Var<'t> {
        self.unary(ScalarOp::Softplus)
    }

    pub fn sin(self) -> Var<'t> {
        self.unary(ScalarOp::Sin)
    }

    pub fn cos(self) -> Var<'t> {
        self.unary(ScalarOp::Cos)
    }

    /// `atan2(self, x)`.
    pub fn atan2(self, x: Var<'t>) -> Var<'t> {
        self.binary(ScalarOp::Atan2, x)
    }

    pub fn bce_with_logits(self, label: f64) -> Var<'t> {
        let label = self.tape.constant(label);
        self.binary(ScalarOp::BceWithLogits, label)
    }

    pub fn scale(self, k: f64) -> Var<'t> {
        self * k
    }
}

macro_rules! var_binop {
    ($trait:ident, $method:ident, $op:expr) => {
        impl<'t> $trait<Var<'t>> for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                self.binary($op, rhs)
            }
        }

        impl<'t> $trait<f64> for Var<'t> {
            type Output = Var<'t>;
            fn $method(self, rhs: f64) -> Var<'t> {
                let rhs = self.tape.constant(rhs);
                self.binary($op, rhs)
            }
        }

        impl<'t> $trait<Var<'t>> for f64 {
            type Output = Var<'t>;
            fn $method(self, rhs: Var<'t>) -> Var<'t> {
                let lhs = rhs.tape.constant(self);
                lhs.binary($op, rhs)
            }
        }
    };
}

var_binop!(Add, add, ScalarOp::Add);
var_binop!(Sub, sub, ScalarOp::Sub);
var_binop!(Mul, mul, ScalarOp::Mul);
var_binop!(Div, div, ScalarOp::Div);

impl<'t> Neg for Var<'t> {
    type Output = Var<'t>;
    fn neg(self) -> Var<'t> {
        self.unary(ScalarOp::Neg)
    }
}

/// Sum of a non-empty slice of vars.
pub fn sum<'t>(terms: &[Var<'t>]) -> Var<'t> {
    let (first, rest) = terms.split_first().expect("sum of empty slice");
    rest.iter().fold(*first, |acc, &v| acc + v)
}

impl<'t> MatVar<'t> {
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn index(&self) -> usize {
        self.index
    }
}
