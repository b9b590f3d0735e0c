//! Reverse-mode automatic differentiation over [`Tensor`] values.
//!
//! Every operation appends a node holding its cached forward value. Nodes only
//! reference earlier nodes, so the node vector is always in topological order.
//!
//! Two backward passes exist:
//!
//! * [`Tape::backward`] propagates numeric gradients from a scalar loss to
//!   every node that requires a gradient. All ops support it.
//! * [`Tape::input_gradient`] records the gradient of an output with respect
//!   to an input as *new tape nodes*, so the result can itself be
//!   differentiated. Only the op set used by the critic (affine maps,
//!   leaky rectifiers, elementwise arithmetic, sums and means) has such a rule;
//!   the rectifier masks are treated as constants, i.e. its second derivative
//!   is taken to be zero almost everywhere.

use super::tensor::{gemm, Layout, Tensor};
use super::NnError;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// `a·b`
    MatMul(NodeId, NodeId),
    /// `a·bᵀ`
    MatMulBt(NodeId, NodeId),
    /// `aᵀ·b`
    MatMulAt(NodeId, NodeId),
    /// `a + 1·b` with `b` a single row
    AddRow(NodeId, NodeId),
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    /// Elementwise product with a constant mask.
    MulConst(NodeId, Tensor),
    Scale(NodeId, f64),
    AddScalar(NodeId),
    LeakyRelu(NodeId, f64),
    Sigmoid(NodeId),
    Softmax(NodeId),
    Square(NodeId),
    /// Euclidean norm of each row, `n×1`.
    RowNorm(NodeId),
    /// Column sums, `1×c`.
    SumRows(NodeId),
    Sum(NodeId),
    Mean(NodeId),
    /// A `1×1` value repeated to the given shape.
    Broadcast(NodeId),
    ConcatRows(Vec<NodeId>),
    /// `−ln max(p[t], floor)` per row, or `−ln max(1 − p[t], floor)` when
    /// `complement` is set.
    PickNegLog {
        input: NodeId,
        targets: Vec<usize>,
        complement: bool,
        floor: f64,
    },
    /// `ln max(a, floor)` elementwise.
    LogFloor(NodeId, f64),
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::MatMulBt(..) => "matmul_bt",
            Op::MatMulAt(..) => "matmul_at",
            Op::AddRow(..) => "add_row",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MulConst(..) => "mul_const",
            Op::Scale(..) => "scale",
            Op::AddScalar(..) => "add_scalar",
            Op::LeakyRelu(..) => "leaky_relu",
            Op::Sigmoid(..) => "sigmoid",
            Op::Softmax(..) => "softmax",
            Op::Square(..) => "square",
            Op::RowNorm(..) => "row_norm",
            Op::SumRows(..) => "sum_rows",
            Op::Sum(..) => "sum",
            Op::Mean(..) => "mean",
            Op::Broadcast(..) => "broadcast",
            Op::ConcatRows(..) => "concat_rows",
            Op::PickNegLog { .. } => "pick_neg_log",
            Op::LogFloor(..) => "log_floor",
        }
    }

    fn parents(&self) -> Vec<NodeId> {
        match self {
            Op::Leaf => vec![],
            Op::MatMul(a, b)
            | Op::MatMulBt(a, b)
            | Op::MatMulAt(a, b)
            | Op::AddRow(a, b)
            | Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b) => vec![*a, *b],
            Op::MulConst(a, _)
            | Op::Scale(a, _)
            | Op::AddScalar(a)
            | Op::LeakyRelu(a, _)
            | Op::Sigmoid(a)
            | Op::Softmax(a)
            | Op::Square(a)
            | Op::RowNorm(a)
            | Op::SumRows(a)
            | Op::Sum(a)
            | Op::Mean(a)
            | Op::Broadcast(a)
            | Op::LogFloor(a, _) => vec![*a],
            Op::PickNegLog { input, .. } => vec![*input],
            Op::ConcatRows(parts) => parts.clone(),
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    op: Op,
    value: Tensor,
    requires_grad: bool,
}

/// A recorded computation. Confined to one thread; rebuilt for every step.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Numeric gradients produced by [`Tape::backward`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, id: NodeId) -> Option<&Tensor> {
        self.grads.get(id.0).and_then(|g| g.as_ref())
    }

    /// Gradient for `id`, or zeros of `shape` if nothing flowed into it.
    pub fn get_or_zeros(&self, id: NodeId, shape: (usize, usize)) -> Tensor {
        self.get(id)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(shape.0, shape.1))
    }
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

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn requires_grad(&self, id: NodeId) -> bool {
        self.nodes[id.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor) -> NodeId {
        let requires_grad = op
            .parents()
            .iter()
            .any(|p| self.nodes[p.0].requires_grad);
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A trainable leaf: gradients flow into it.
    pub fn param(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad: true,
        });
        NodeId(self.nodes.len() - 1)
    }

    /// A leaf that never receives a numeric gradient. It can still be the
    /// target of [`Tape::input_gradient`].
    pub fn constant(&mut self, value: Tensor) -> NodeId {
        self.nodes.push(Node {
            op: Op::Leaf,
            value,
            requires_grad: false,
        });
        NodeId(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = gemm(self.value(a), Layout::Normal, self.value(b), Layout::Normal)?;
        Ok(self.push(Op::MatMul(a, b), v))
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = gemm(self.value(a), Layout::Normal, self.value(b), Layout::Transposed)?;
        Ok(self.push(Op::MatMulBt(a, b), v))
    }

    pub fn matmul_at(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = gemm(self.value(a), Layout::Transposed, self.value(b), Layout::Normal)?;
        Ok(self.push(Op::MatMulAt(a, b), v))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> Result<NodeId, NnError> {
        let (av, rv) = (self.value(a), self.value(row));
        if rv.rows() != 1 || rv.cols() != av.cols() {
            return Err(NnError::Shape(format!(
                "row operand must be 1x{}, got {}x{}",
                av.cols(),
                rv.rows(),
                rv.cols()
            )));
        }
        let mut v = av.clone();
        let cols = v.cols();
        for r in 0..v.rows() {
            for (x, b) in v.row_mut(r).iter_mut().zip(&rv.data()[..cols]) {
                *x += b;
            }
        }
        Ok(self.push(Op::AddRow(a, row), v))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y)?;
        Ok(self.push(Op::Add(a, b), v))
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x - y)?;
        Ok(self.push(Op::Sub(a, b), v))
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId, NnError> {
        let v = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        Ok(self.push(Op::Mul(a, b), v))
    }

    pub fn mul_const(&mut self, a: NodeId, mask: Tensor) -> Result<NodeId, NnError> {
        let v = self.value(a).zip_map(&mask, |x, m| x * m)?;
        Ok(self.push(Op::MulConst(a, mask), v))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn add_scalar(&mut self, a: NodeId, s: f64) -> NodeId {
        let v = self.value(a).map(|x| x + s);
        self.push(Op::AddScalar(a), v)
    }

    pub fn leaky_relu(&mut self, a: NodeId, slope: f64) -> NodeId {
        let v = self.value(a).map(|x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), v)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.leaky_relu(a, 0.0)
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(sigmoid);
        self.push(Op::Sigmoid(a), v)
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: NodeId) -> NodeId {
        let v = softmax_rows(self.value(a));
        self.push(Op::Softmax(a), v)
    }

    pub fn square(&mut self, a: NodeId) -> NodeId {
        let v = self.value(a).map(|x| x * x);
        self.push(Op::Square(a), v)
    }

    pub fn row_norm(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let data = av
            .iter_rows()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .collect();
        let v = Tensor::new(av.rows(), 1, data).expect("row norm shape");
        self.push(Op::RowNorm(a), v)
    }

    pub fn sum_rows(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let mut v = Tensor::zeros(1, av.cols());
        for r in av.iter_rows() {
            for (s, x) in v.data_mut().iter_mut().zip(r) {
                *s += x;
            }
        }
        self.push(Op::SumRows(a), v)
    }

    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let v = Tensor::scalar(self.value(a).sum());
        self.push(Op::Sum(a), v)
    }

    /// Mean over all entries; the mean of an empty tensor is 0.
    pub fn mean(&mut self, a: NodeId) -> NodeId {
        let av = self.value(a);
        let n = av.len();
        let v = Tensor::scalar(if n == 0 { 0.0 } else { av.sum() / n as f64 });
        self.push(Op::Mean(a), v)
    }

    pub fn broadcast(&mut self, a: NodeId, rows: usize, cols: usize) -> Result<NodeId, NnError> {
        let av = self.value(a);
        if av.shape() != (1, 1) {
            return Err(NnError::Shape("broadcast source must be 1x1".into()));
        }
        let v = Tensor::filled(rows, cols, av.get(0, 0));
        Ok(self.push(Op::Broadcast(a), v))
    }

    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId, NnError> {
        let values: Vec<&Tensor> = parts.iter().map(|p| self.value(*p)).collect();
        let v = Tensor::vstack(&values)?;
        Ok(self.push(Op::ConcatRows(parts.to_vec()), v))
    }

    /// Per-row cross-entropy `−ln max(p[t], floor)` (or its complement form)
    /// of a probability matrix, as an `n×1` node.
    pub fn pick_neg_log(
        &mut self,
        probs: NodeId,
        targets: &[usize],
        complement: bool,
        floor: f64,
    ) -> Result<NodeId, NnError> {
        let pv = self.value(probs);
        if targets.len() != pv.rows() {
            return Err(NnError::Shape(format!(
                "{} targets for {} probability rows",
                targets.len(),
                pv.rows()
            )));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= pv.cols()) {
            return Err(NnError::Contract(format!(
                "target class {t} out of range for {} classes",
                pv.cols()
            )));
        }
        let data = targets
            .iter()
            .enumerate()
            .map(|(r, &t)| {
                let p = pv.get(r, t);
                let q = if complement { 1.0 - p } else { p };
                -q.max(floor).ln()
            })
            .collect();
        let v = Tensor::new(targets.len(), 1, data)?;
        Ok(self.push(
            Op::PickNegLog {
                input: probs,
                targets: targets.to_vec(),
                complement,
                floor,
            },
            v,
        ))
    }

    pub fn log_floor(&mut self, a: NodeId, floor: f64) -> NodeId {
        let v = self.value(a).map(|x| x.max(floor).ln());
        self.push(Op::LogFloor(a, floor), v)
    }

    /// Numeric reverse pass from a `1×1` loss node.
    pub fn backward(&self, loss: NodeId) -> Result<Gradients, NnError> {
        if self.value(loss).shape() != (1, 1) {
            let (r, c) = self.value(loss).shape();
            return Err(NnError::Contract(format!(
                "backward needs a scalar loss, got {r}x{c}"
            )));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &self.nodes[i];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            for (parent, pg) in self.parent_grads(i, &g)? {
                if !self.nodes[parent.0].requires_grad {
                    continue;
                }
                match &mut grads[parent.0] {
                    Some(acc) => acc.add_assign(&pg),
                    slot => *slot = Some(pg),
                }
            }
            grads[i] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Gradients of node `i` with respect to each parent, given the incoming
    /// gradient `g`. Parents that do not require a gradient may be skipped.
    fn parent_grads(&self, i: usize, g: &Tensor) -> Result<Vec<(NodeId, Tensor)>, NnError> {
        let node = &self.nodes[i];
        let needs = |id: &NodeId| self.nodes[id.0].requires_grad;
        let val = |id: &NodeId| &self.nodes[id.0].value;
        let mut out = Vec::with_capacity(2);
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if needs(a) {
                    out.push((*a, gemm(g, Layout::Normal, val(b), Layout::Transposed)?));
                }
                if needs(b) {
                    out.push((*b, gemm(val(a), Layout::Transposed, g, Layout::Normal)?));
                }
            }
            Op::MatMulBt(a, b) => {
                if needs(a) {
                    out.push((*a, gemm(g, Layout::Normal, val(b), Layout::Normal)?));
                }
                if needs(b) {
                    out.push((*b, gemm(g, Layout::Transposed, val(a), Layout::Normal)?));
                }
            }
            Op::MatMulAt(a, b) => {
                if needs(a) {
                    out.push((*a, gemm(val(b), Layout::Normal, g, Layout::Transposed)?));
                }
                if needs(b) {
                    out.push((*b, gemm(val(a), Layout::Normal, g, Layout::Normal)?));
                }
            }
            Op::AddRow(a, b) => {
                if needs(b) {
                    let mut s = Tensor::zeros(1, g.cols());
                    for r in g.iter_rows() {
                        for (acc, x) in s.data_mut().iter_mut().zip(r) {
                            *acc += x;
                        }
                    }
                    out.push((*b, s));
                }
                out.push((*a, g.clone()));
            }
            Op::Add(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.clone()));
            }
            Op::Sub(a, b) => {
                out.push((*a, g.clone()));
                out.push((*b, g.map(|x| -x)));
            }
            Op::Mul(a, b) => {
                if needs(a) {
                    out.push((*a, g.zip_map(val(b), |x, y| x * y)?));
                }
                if needs(b) {
                    out.push((*b, g.zip_map(val(a), |x, y| x * y)?));
                }
            }
            Op::MulConst(a, m) => out.push((*a, g.zip_map(m, |x, y| x * y)?)),
            Op::Scale(a, s) => out.push((*a, g.map(|x| x * s))),
            Op::AddScalar(a) => out.push((*a, g.clone())),
            Op::LeakyRelu(a, slope) => {
                out.push((*a, g.zip_map(val(a), |x, v| if v > 0.0 { x } else { x * slope })?))
            }
            Op::Sigmoid(a) => {
                out.push((*a, g.zip_map(&node.value, |x, s| x * s * (1.0 - s))?))
            }
            Op::Softmax(a) => {
                let p = &node.value;
                let mut ga = Tensor::zeros(p.rows(), p.cols());
                for r in 0..p.rows() {
                    let (pr, gr) = (p.row(r), g.row(r));
                    let dot: f64 = pr.iter().zip(gr).map(|(x, y)| x * y).sum();
                    for ((o, &pi), &gi) in ga.row_mut(r).iter_mut().zip(pr).zip(gr) {
                        *o = pi * (gi - dot);
                    }
                }
                out.push((*a, ga));
            }
            Op::Square(a) => out.push((*a, g.zip_map(val(a), |x, v| 2.0 * x * v)?)),
            Op::RowNorm(a) => {
                let av = val(a);
                let mut ga = Tensor::zeros(av.rows(), av.cols());
                for r in 0..av.rows() {
                    let n = node.value.get(r, 0);
                    if n > 0.0 {
                        let f = g.get(r, 0) / n;
                        for (o, x) in ga.row_mut(r).iter_mut().zip(av.row(r)) {
                            *o = f * x;
                        }
                    }
                }
                out.push((*a, ga));
            }
            Op::SumRows(a) => {
                let (rows, cols) = val(a).shape();
                let mut ga = Tensor::zeros(rows, cols);
                for r in 0..rows {
                    ga.row_mut(r).copy_from_slice(g.data());
                }
                out.push((*a, ga));
            }
            Op::Sum(a) => {
                let (rows, cols) = val(a).shape();
                out.push((*a, Tensor::filled(rows, cols, g.get(0, 0))));
            }
            Op::Mean(a) => {
                let (rows, cols) = val(a).shape();
                let n = (rows * cols).max(1) as f64;
                out.push((*a, Tensor::filled(rows, cols, g.get(0, 0) / n)));
            }
            Op::Broadcast(a) => out.push((*a, Tensor::scalar(g.sum()))),
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for p in parts {
                    let rows = val(p).rows();
                    let idx: Vec<usize> = (start..start + rows).collect();
                    start += rows;
                    if needs(p) {
                        out.push((*p, g.select_rows(&idx)));
                    }
                }
            }
            Op::PickNegLog {
                input,
                targets,
                complement,
                floor,
            } => {
                let pv = val(input);
                let mut ga = Tensor::zeros(pv.rows(), pv.cols());
                for (r, &t) in targets.iter().enumerate() {
                    let p = pv.get(r, t);
                    let d = if *complement {
                        if 1.0 - p > *floor {
                            1.0 / (1.0 - p)
                        } else {
                            0.0
                        }
                    } else if p > *floor {
                        -1.0 / p
                    } else {
                        0.0
                    };
                    ga.set(r, t, g.get(r, 0) * d);
                }
                out.push((*input, ga));
            }
            Op::LogFloor(a, floor) => {
                out.push((*a, g.zip_map(val(a), |x, v| if v > *floor { x / v } else { 0.0 })?))
            }
        }
        Ok(out)
    }

    /// Records `∂(Σ output)/∂input` on the tape and returns its node.
    ///
    /// For an `n×1` output whose rows depend only on the matching input row
    /// (a per-row critic), row `r` of the result is `∇ output[r]` at input
    /// row `r`. The returned node can be used in further ops and
    /// differentiated by [`Tape::backward`].
    pub fn input_gradient(&mut self, output: NodeId, input: NodeId) -> Result<NodeId, NnError> {
        let end = output.0 + 1;
        let mut on_path = vec![false; end];
        if input.0 < end {
            on_path[input.0] = true;
        }
        for i in input.0 + 1..end {
            on_path[i] = self.nodes[i].op.parents().iter().any(|p| on_path[p.0]);
        }
        let input_shape = self.value(input).shape();
        if !on_path[output.0] {
            return Ok(self.constant(Tensor::zeros(input_shape.0, input_shape.1)));
        }
        let (r, c) = self.value(output).shape();
        let mut sym: Vec<Option<NodeId>> = vec![None; end];
        sym[output.0] = Some(self.constant(Tensor::ones(r, c)));
        for i in (input.0 + 1..end).rev() {
            if !on_path[i] {
                continue;
            }
            let Some(g) = sym[i] else { continue };
            let op = self.nodes[i].op.clone();
            let contributions = self.symbolic_parent_grads(&op, g, &on_path)?;
            for (parent, pg) in contributions {
                sym[parent.0] = Some(match sym[parent.0] {
                    Some(acc) => self.add(acc, pg)?,
                    None => pg,
                });
            }
        }
        match sym[input.0] {
            Some(g) => Ok(g),
            None => Ok(self.constant(Tensor::zeros(input_shape.0, input_shape.1))),
        }
    }

    fn symbolic_parent_grads(
        &mut self,
        op: &Op,
        g: NodeId,
        on_path: &[bool],
    ) -> Result<Vec<(NodeId, NodeId)>, NnError> {
        let on = |id: &NodeId| on_path[id.0];
        let mut out = Vec::with_capacity(2);
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if on(a) {
                    out.push((*a, self.matmul_bt(g, *b)?));
                }
                if on(b) {
                    out.push((*b, self.matmul_at(*a, g)?));
                }
            }
            Op::MatMulBt(a, b) => {
                if on(a) {
                    out.push((*a, self.matmul(g, *b)?));
                }
                if on(b) {
                    out.push((*b, self.matmul_at(g, *a)?));
                }
            }
            Op::MatMulAt(a, b) => {
                if on(a) {
                    out.push((*a, self.matmul_bt(*b, g)?));
                }
                if on(b) {
                    out.push((*b, self.matmul(*a, g)?));
                }
            }
            Op::AddRow(a, b) => {
                if on(a) {
                    out.push((*a, g));
                }
                if on(b) {
                    out.push((*b, self.sum_rows(g)));
                }
            }
            Op::Add(a, b) => {
                if on(a) {
                    out.push((*a, g));
                }
                if on(b) {
                    out.push((*b, g));
                }
            }
            Op::Sub(a, b) => {
                if on(a) {
                    out.push((*a, g));
                }
                if on(b) {
                    out.push((*b, self.scale(g, -1.0)));
                }
            }
            Op::Mul(a, b) => {
                if on(a) {
                    out.push((*a, self.mul(g, *b)?));
                }
                if on(b) {
                    out.push((*b, self.mul(g, *a)?));
                }
            }
            Op::MulConst(a, m) => {
                if on(a) {
                    out.push((*a, self.mul_const(g, m.clone())?));
                }
            }
            Op::Scale(a, s) => {
                if on(a) {
                    out.push((*a, self.scale(g, *s)));
                }
            }
            Op::AddScalar(a) => {
                if on(a) {
                    out.push((*a, g));
                }
            }
            Op::LeakyRelu(a, slope) => {
                if on(a) {
                    let mask = self.value(*a).map(|v| if v > 0.0 { 1.0 } else { *slope });
                    out.push((*a, self.mul_const(g, mask)?));
                }
            }
            Op::Square(a) => {
                if on(a) {
                    let twice = self.scale(*a, 2.0);
                    out.push((*a, self.mul(g, twice)?));
                }
            }
            Op::SumRows(a) => {
                if on(a) {
                    let (rows, cols) = self.value(*a).shape();
                    let zeros = self.constant(Tensor::zeros(rows, cols));
                    out.push((*a, self.add_row(zeros, g)?));
                }
            }
            Op::Sum(a) => {
                if on(a) {
                    let (rows, cols) = self.value(*a).shape();
                    out.push((*a, self.broadcast(g, rows, cols)?));
                }
            }
            Op::Mean(a) => {
                if on(a) {
                    let (rows, cols) = self.value(*a).shape();
                    let b = self.broadcast(g, rows, cols)?;
                    out.push((*a, self.scale(b, 1.0 / (rows * cols).max(1) as f64)));
                }
            }
            Op::Broadcast(a) => {
                if on(a) {
                    out.push((*a, self.sum(g)));
                }
            }
            other => {
                return Err(NnError::UnsupportedSecondOrder(other.name()));
            }
        }
        Ok(out)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable row-wise softmax.
pub fn softmax_rows(t: &Tensor) -> Tensor {
    let mut out = t.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}
