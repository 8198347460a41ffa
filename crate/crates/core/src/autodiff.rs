//! Minimal reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Graph`] is an append-only arena of nodes. Building an operation never
//! computes anything; values are produced by [`Graph::evaluate`] given a set of
//! [`Bindings`] for the graph's named inputs, and gradients by
//! [`Graph::gradient`]. Because children are always created before their
//! parents, node order is a valid topological order.
//!
//! Graphs are meant to be rebuilt for every training step.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::matrix::{softmax_in_place, Matrix};

/// `(rows, cols)`.
pub type Shape = (usize, usize);

/// Values for the named inputs of a graph.
pub type Bindings = HashMap<String, Matrix>;

/// Lower clamp applied before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AutodiffError {
    #[error("input `{0}` has no binding")]
    UnboundInput(String),
    #[error("binding for `{name}` has shape {got:?}, expected {expected:?}")]
    BindingShape { name: String, expected: Shape, got: Shape },
    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape { op: &'static str, left: Shape, right: Shape },
    #[error("input `{name}` already declared with shape {existing:?}")]
    DuplicateInput { name: String, existing: Shape },
    #[error("gradient needs a scalar root, got shape {0:?}")]
    Rank(Shape),
    #[error("node {0} is not an input")]
    NotAnInput(usize),
}

pub type Result<T, E = AutodiffError> = std::result::Result<T, E>;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Expr(usize);

impl Expr {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
pub enum Op {
    Input(String),
    Constant(Matrix),
    Add(Expr, Expr),
    Subtract(Expr, Expr),
    Multiply(Expr, Expr),
    MatMul(Expr, Expr),
    Relu(Expr),
    Exp(Expr),
    /// `ln(max(v, LOG_FLOOR))`
    Log(Expr),
    Sum(Expr),
    Mean(Expr),
    SoftmaxRows(Expr),
    StopGradient(Expr),
    Square(Expr),
    Negate(Expr),
    /// Replicates a `1 x c` row (or a `1 x 1` scalar) up to the node's shape.
    Broadcast(Expr),
}

impl Op {
    pub fn children(&self) -> Vec<Expr> {
        match *self {
            Op::Input(_) | Op::Constant(_) => vec![],
            Op::Add(a, b) | Op::Subtract(a, b) | Op::Multiply(a, b) | Op::MatMul(a, b) => vec![a, b],
            Op::Relu(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::SoftmaxRows(a)
            | Op::StopGradient(a)
            | Op::Square(a)
            | Op::Negate(a)
            | Op::Broadcast(a) => vec![a],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    shape: Shape,
}

/// Per-input gradients, keyed by input name.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gradient {
    entries: BTreeMap<String, Matrix>,
}

impl Gradient {
    pub fn get(&self, name: &str) -> Option<&Matrix> {
        self.entries.get(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Matrix)> {
        self.entries.iter()
    }

    pub fn into_map(self) -> BTreeMap<String, Matrix> {
        self.entries
    }

    /// Largest coordinate-wise relative error against `other`, using
    /// `|a - b| / max(|a|, |b|, floor)`.
    pub fn max_relative_error(&self, other: &Gradient, floor: f64) -> f64 {
        let mut worst: f64 = 0.0;
        for (name, a) in &self.entries {
            let Some(b) = other.entries.get(name) else {
                return f64::INFINITY;
            };
            for (&x, &y) in a.data().iter().zip(b.data()) {
                let denom = x.abs().max(y.abs()).max(floor);
                worst = worst.max((x - y).abs() / denom);
            }
        }
        worst
    }
}

/// An append-only computation graph.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    inputs: HashMap<String, Expr>,
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

    pub fn shape(&self, e: Expr) -> Shape {
        self.nodes[e.0].shape
    }

    pub fn op(&self, e: Expr) -> &Op {
        &self.nodes[e.0].op
    }

    fn push(&mut self, op: Op, shape: Shape) -> Expr {
        self.nodes.push(Node { op, shape });
        Expr(self.nodes.len() - 1)
    }

    /// Declares a named input. Declaring the same name twice with the same
    /// shape returns the existing node.
    pub fn input(&mut self, name: impl Into<String>, shape: Shape) -> Result<Expr> {
        let name = name.into();
        if let Some(&e) = self.inputs.get(&name) {
            let existing = self.shape(e);
            if existing == shape {
                return Ok(e);
            }
            return Err(AutodiffError::DuplicateInput { name, existing });
        }
        let e = self.push(Op::Input(name.clone()), shape);
        self.inputs.insert(name, e);
        Ok(e)
    }

    pub fn input_name(&self, e: Expr) -> Result<&str> {
        match &self.nodes[e.0].op {
            Op::Input(name) => Ok(name),
            _ => Err(AutodiffError::NotAnInput(e.0)),
        }
    }

    pub fn constant(&mut self, value: Matrix) -> Expr {
        let shape = value.shape();
        self.push(Op::Constant(value), shape)
    }

    pub fn scalar(&mut self, value: f64) -> Expr {
        self.constant(Matrix::scalar(value))
    }

    /// Brings `a` and `b` to a common shape, inserting a broadcast on the
    /// smaller side when it is a row vector or a scalar.
    fn align(&mut self, op: &'static str, a: Expr, b: Expr) -> Result<(Expr, Expr, Shape)> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa == sb {
            return Ok((a, b, sa));
        }
        if broadcastable(sb, sa) {
            let b = self.push(Op::Broadcast(b), sa);
            return Ok((a, b, sa));
        }
        if broadcastable(sa, sb) {
            let a = self.push(Op::Broadcast(a), sb);
            return Ok((a, b, sb));
        }
        Err(AutodiffError::Shape { op, left: sa, right: sb })
    }

    pub fn add(&mut self, a: Expr, b: Expr) -> Result<Expr> {
        let (a, b, shape) = self.align("add", a, b)?;
        Ok(self.push(Op::Add(a, b), shape))
    }

    pub fn sub(&mut self, a: Expr, b: Expr) -> Result<Expr> {
        let (a, b, shape) = self.align("subtract", a, b)?;
        Ok(self.push(Op::Subtract(a, b), shape))
    }

    pub fn mul(&mut self, a: Expr, b: Expr) -> Result<Expr> {
        let (a, b, shape) = self.align("multiply", a, b)?;
        Ok(self.push(Op::Multiply(a, b), shape))
    }

    pub fn matmul(&mut self, a: Expr, b: Expr) -> Result<Expr> {
        let (sa, sb) = (self.shape(a), self.shape(b));
        if sa.1 != sb.0 {
            return Err(AutodiffError::Shape { op: "matmul", left: sa, right: sb });
        }
        Ok(self.push(Op::MatMul(a, b), (sa.0, sb.1)))
    }

    /// Explicit broadcast of a row vector or scalar to `shape`.
    pub fn broadcast(&mut self, a: Expr, shape: Shape) -> Result<Expr> {
        let sa = self.shape(a);
        if sa == shape {
            return Ok(a);
        }
        if !broadcastable(sa, shape) {
            return Err(AutodiffError::Shape { op: "broadcast", left: sa, right: shape });
        }
        Ok(self.push(Op::Broadcast(a), shape))
    }

    /// `a * c` for a constant scalar `c`.
    pub fn scale(&mut self, a: Expr, c: f64) -> Expr {
        let c = self.scalar(c);
        self.mul(a, c).expect("scalar always broadcasts")
    }

    pub fn relu(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::Relu(a), s)
    }

    pub fn exp(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::Exp(a), s)
    }

    pub fn log(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::Log(a), s)
    }

    pub fn sum(&mut self, a: Expr) -> Expr {
        self.push(Op::Sum(a), (1, 1))
    }

    pub fn mean(&mut self, a: Expr) -> Expr {
        self.push(Op::Mean(a), (1, 1))
    }

    pub fn softmax_rows(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::SoftmaxRows(a), s)
    }

    pub fn stop_gradient(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::StopGradient(a), s)
    }

    pub fn square(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::Square(a), s)
    }

    pub fn neg(&mut self, a: Expr) -> Expr {
        let s = self.shape(a);
        self.push(Op::Negate(a), s)
    }

    /// Indices of every node `root` depends on, ascending.
    fn reachable(&self, root: Expr) -> Vec<usize> {
        let mut seen = vec![false; root.0 + 1];
        let mut stack = vec![root.0];
        seen[root.0] = true;
        while let Some(i) = stack.pop() {
            for c in self.nodes[i].op.children() {
                if !seen[c.0] {
                    seen[c.0] = true;
                    stack.push(c.0);
                }
            }
        }
        seen.iter().enumerate().filter_map(|(i, &s)| s.then_some(i)).collect()
    }

    fn forward(&self, root: Expr, bindings: &Bindings) -> Result<(Vec<usize>, Vec<Option<Matrix>>)> {
        self.forward_frozen(root, bindings, None)
    }

    /// Forward pass; with `frozen`, stop-gradient nodes take their values from
    /// it instead of their operand.
    fn forward_frozen(
        &self,
        root: Expr,
        bindings: &Bindings,
        frozen: Option<&[Option<Matrix>]>,
    ) -> Result<(Vec<usize>, Vec<Option<Matrix>>)> {
        let order = self.reachable(root);
        let mut values: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        for &i in &order {
            let node = &self.nodes[i];
            if let (Op::StopGradient(_), Some(f)) = (&node.op, frozen) {
                values[i] = f[i].clone();
                continue;
            }
            let v = |e: Expr| values[e.0].as_ref().expect("child evaluated before parent");
            let value = match &node.op {
                Op::Input(name) => {
                    let bound = bindings
                        .get(name)
                        .ok_or_else(|| AutodiffError::UnboundInput(name.clone()))?;
                    if bound.shape() != node.shape {
                        return Err(AutodiffError::BindingShape {
                            name: name.clone(),
                            expected: node.shape,
                            got: bound.shape(),
                        });
                    }
                    bound.clone()
                }
                Op::Constant(m) => m.clone(),
                Op::Add(a, b) => v(*a).zip_map(v(*b), |x, y| x + y),
                Op::Subtract(a, b) => v(*a).zip_map(v(*b), |x, y| x - y),
                Op::Multiply(a, b) => v(*a).zip_map(v(*b), |x, y| x * y),
                Op::MatMul(a, b) => v(*a).matmul(v(*b)),
                Op::Relu(a) => v(*a).map(|x| if x > 0.0 { x } else { 0.0 }),
                Op::Exp(a) => v(*a).map(f64::exp),
                Op::Log(a) => v(*a).map(|x| x.max(LOG_FLOOR).ln()),
                Op::Sum(a) => Matrix::scalar(v(*a).sum()),
                Op::Mean(a) => {
                    let m = v(*a);
                    Matrix::scalar(m.sum() / m.len() as f64)
                }
                Op::SoftmaxRows(a) => v(*a).softmax_rows(),
                Op::StopGradient(a) => v(*a).clone(),
                Op::Square(a) => v(*a).map(|x| x * x),
                Op::Negate(a) => v(*a).map(|x| -x),
                Op::Broadcast(a) => {
                    let src = v(*a);
                    let (rows, cols) = node.shape;
                    let mut out = Matrix::zeros(rows, cols);
                    for r in 0..rows {
                        for c in 0..cols {
                            let sc = if src.cols() == 1 { 0 } else { c };
                            out.set(r, c, src.get(0, sc));
                        }
                    }
                    out
                }
            };
            values[i] = Some(value);
        }
        Ok((order, values))
    }

    /// Value of `root` under `bindings`.
    pub fn evaluate(&self, root: Expr, bindings: &Bindings) -> Result<Matrix> {
        let (_, mut values) = self.forward(root, bindings)?;
        Ok(values[root.0].take().expect("root evaluated"))
    }

    /// Gradient of the scalar `root` with respect to each input in `wrt`.
    pub fn gradient(&self, root: Expr, bindings: &Bindings, wrt: &[Expr]) -> Result<Gradient> {
        self.value_and_gradient(root, bindings, wrt).map(|(_, g)| g)
    }

    /// The scalar value of `root` together with its gradient.
    pub fn value_and_gradient(
        &self,
        root: Expr,
        bindings: &Bindings,
        wrt: &[Expr],
    ) -> Result<(f64, Gradient)> {
        if self.shape(root) != (1, 1) {
            return Err(AutodiffError::Rank(self.shape(root)));
        }
        let mut names = Vec::with_capacity(wrt.len());
        for &e in wrt {
            names.push(self.input_name(e)?.to_string());
        }
        let (order, values) = self.forward(root, bindings)?;
        let value = values[root.0].as_ref().expect("root evaluated").item();
        let mut adjoints: Vec<Option<Matrix>> = vec![None; root.0 + 1];
        adjoints[root.0] = Some(Matrix::scalar(1.0));

        for &i in order.iter().rev() {
            let node = &self.nodes[i];
            // Leaves keep their adjoint; it is the result for inputs.
            if matches!(node.op, Op::Input(_)) {
                continue;
            }
            let Some(upstream) = adjoints[i].take() else { continue };
            let val = |e: Expr| values[e.0].as_ref().expect("forward value");
            let mut accumulate = |e: Expr, g: Matrix| match &mut adjoints[e.0] {
                Some(acc) => {
                    for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                        *a += b;
                    }
                }
                slot @ None => *slot = Some(g),
            };
            match &node.op {
                Op::Input(_) | Op::Constant(_) | Op::StopGradient(_) => {}
                Op::Add(a, b) => {
                    accumulate(*a, upstream.clone());
                    accumulate(*b, upstream);
                }
                Op::Subtract(a, b) => {
                    accumulate(*a, upstream.clone());
                    accumulate(*b, upstream.map(|x| -x));
                }
                Op::Multiply(a, b) => {
                    accumulate(*a, upstream.zip_map(val(*b), |g, y| g * y));
                    accumulate(*b, upstream.zip_map(val(*a), |g, x| g * x));
                }
                Op::MatMul(a, b) => {
                    accumulate(*a, upstream.matmul(&val(*b).transpose()));
                    accumulate(*b, val(*a).transpose().matmul(&upstream));
                }
                Op::Relu(a) => {
                    accumulate(*a, upstream.zip_map(val(*a), |g, x| if x > 0.0 { g } else { 0.0 }));
                }
                Op::Exp(a) => {
                    let out = values[i].as_ref().expect("forward value");
                    accumulate(*a, upstream.zip_map(out, |g, y| g * y));
                }
                Op::Log(a) => {
                    accumulate(
                        *a,
                        upstream.zip_map(val(*a), |g, x| if x > LOG_FLOOR { g / x } else { 0.0 }),
                    );
                }
                Op::Sum(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(*a, Matrix::filled(r, c, upstream.item()));
                }
                Op::Mean(a) => {
                    let (r, c) = self.shape(*a);
                    accumulate(*a, Matrix::filled(r, c, upstream.item() / (r * c) as f64));
                }
                Op::SoftmaxRows(a) => {
                    let y = values[i].as_ref().expect("forward value");
                    let mut g = Matrix::zeros(y.rows(), y.cols());
                    for r in 0..y.rows() {
                        let dot: f64 = y.row(r).iter().zip(upstream.row(r)).map(|(p, u)| p * u).sum();
                        for (k, out) in g.row_mut(r).iter_mut().enumerate() {
                            *out = y.get(r, k) * (upstream.get(r, k) - dot);
                        }
                    }
                    accumulate(*a, g);
                }
                Op::Square(a) => {
                    accumulate(*a, upstream.zip_map(val(*a), |g, x| 2.0 * g * x));
                }
                Op::Negate(a) => accumulate(*a, upstream.map(|g| -g)),
                Op::Broadcast(a) => {
                    let (_, sc) = self.shape(*a);
                    let mut g = Matrix::zeros(1, sc);
                    for r in 0..upstream.rows() {
                        for c in 0..upstream.cols() {
                            let target = if sc == 1 { 0 } else { c };
                            let cur = g.get(0, target);
                            g.set(0, target, cur + upstream.get(r, c));
                        }
                    }
                    accumulate(*a, g);
                }
            }
        }

        let mut entries = BTreeMap::new();
        for (&e, name) in wrt.iter().zip(names) {
            let (r, c) = self.shape(e);
            let g = match adjoints.get(e.0) {
                Some(Some(m)) => m.clone(),
                _ => Matrix::zeros(r, c),
            };
            entries.insert(name, g);
        }
        Ok((value, Gradient { entries }))
    }

    /// Central finite-difference estimate of the gradient of scalar `root`.
    /// Stop-gradient nodes are held at their values under `bindings`, so the
    /// estimate matches the derivative the graph defines.
    pub fn finite_difference_gradient(
        &self,
        root: Expr,
        bindings: &Bindings,
        wrt: &[Expr],
        step: f64,
    ) -> Result<Gradient> {
        if self.shape(root) != (1, 1) {
            return Err(AutodiffError::Rank(self.shape(root)));
        }
        let (_, frozen) = self.forward_frozen(root, bindings, None)?;
        let eval = |b: &Bindings| -> Result<f64> {
            let (_, mut values) = self.forward_frozen(root, b, Some(&frozen))?;
            Ok(values[root.0].take().expect("root evaluated").item())
        };
        let mut work = bindings.clone();
        let mut entries = BTreeMap::new();
        for &e in wrt {
            let name = self.input_name(e)?.to_string();
            let base = work
                .get(&name)
                .cloned()
                .ok_or_else(|| AutodiffError::UnboundInput(name.clone()))?;
            let mut grad = Matrix::zeros(base.rows(), base.cols());
            for k in 0..base.len() {
                let mut plus = base.clone();
                plus.data_mut()[k] += step;
                work.insert(name.clone(), plus);
                let f_plus = eval(&work)?;
                let mut minus = base.clone();
                minus.data_mut()[k] -= step;
                work.insert(name.clone(), minus);
                let f_minus = eval(&work)?;
                grad.data_mut()[k] = (f_plus - f_minus) / (2.0 * step);
            }
            work.insert(name.clone(), base);
            entries.insert(name, grad);
        }
        Ok(Gradient { entries })
    }
}

fn broadcastable(small: Shape, big: Shape) -> bool {
    small.0 == 1 && (small.1 == big.1 || small.1 == 1) && small != big
}

/// Row-softmax of a plain matrix through the same numerics as the graph op.
pub fn softmax(values: &Matrix) -> Matrix {
    let mut out = values.clone();
    for r in 0..out.rows() {
        softmax_in_place(out.row_mut(r));
    }
    out
}
