use super::Tensor;
use crate::error::{Error, Result};

/// Clamp applied to predictions inside the cross-entropy.
pub const BCE_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Sub(Var, Var),
    Hadamard(Var, Var),
    Sigmoid(Var),
    Tanh(Var),
    Softmax(Var),
    Scale(Var, f64),
    Sum(Var),
    ConcatRows(Vec<Var>),
    ConcatCols(Vec<Var>),
    Transpose(Var),
    SliceRows(Var, usize),
    SliceCols(Var, usize),
    EmbedSum(Var, Vec<Vec<u32>>),
    WeightedBce { pred: Var, targets: Vec<f64>, w_pos: f64, w_neg: f64 },
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records operations in execution order, which is also a topological order.
///
/// Gradients of leaves accumulate across [`Tape::backward`] calls until
/// [`Tape::zero_grad`]; calling backward twice doubles them.
#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
    leaf_grads: Vec<Option<Tensor>>,
}

fn shape_err(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::Shape {
        op,
        detail: format!("{}x{} vs {}x{}", a.rows(), a.cols(), b.rows(), b.cols()),
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

fn zip_map(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor { rows: a.rows(), cols: a.cols(), data }
}

fn softmax(t: &Tensor) -> Tensor {
    let max = t.data().iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = t.data().iter().map(|v| (v - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    Tensor { rows: t.rows(), cols: t.cols(), data: exp.into_iter().map(|v| v / total).collect() }
}

/// `-mean(w_pos·y·ln ŷ + w_neg·(1-y)·ln(1-ŷ))` with ŷ clamped to `[ε, 1-ε]`.
pub fn weighted_bce(y_hat: &[f64], y: &[f64], w_pos: f64, w_neg: f64) -> f64 {
    let n = y_hat.len().max(1) as f64;
    -y_hat
        .iter()
        .zip(y)
        .map(|(&p, &t)| {
            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
            w_pos * t * p.ln() + w_neg * (1.0 - t) * (1.0 - p).ln()
        })
        .sum::<f64>()
        / n
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op: Op::Leaf, requires_grad });
        self.leaf_grads.push(None);
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.leaf(value, true)
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.leaf(value, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Accumulated gradient of a leaf; `None` until some backward reached it.
    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.leaf_grads[v.0].as_ref()
    }

    /// Accumulated gradient of a leaf, zeros if never reached.
    pub fn grad_or_zeros(&self, v: Var) -> Tensor {
        self.grad(v).cloned().unwrap_or_else(|| {
            let t = self.value(v);
            Tensor::zeros(t.rows(), t.cols())
        })
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.leaf_grads {
            *g = None;
        }
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite { op: op_name });
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        self.nodes.push(Node { value, op, requires_grad });
        self.leaf_grads.push(None);
        Ok(Var(self.nodes.len() - 1))
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape() != y.shape() {
            return Err(shape_err(op, x, y));
        }
        Ok(())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b), &[a, b])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x + y);
        self.push("add", v, Op::Add(a, b), &[a, b])
    }

    /// Adds a `1×c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Result<Var> {
        let (x, r) = (self.value(a), self.value(row));
        if r.rows() != 1 || r.cols() != x.cols() {
            return Err(shape_err("add_row", x, r));
        }
        let mut v = x.clone();
        let c = x.cols();
        for (i, e) in v.data_mut().iter_mut().enumerate() {
            *e += r.data()[i % c];
        }
        self.push("add_row", v, Op::AddRow(a, row), &[a, row])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("sub", a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x - y);
        self.push("sub", v, Op::Sub(a, b), &[a, b])
    }

    pub fn hadamard(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("hadamard", a, b)?;
        let v = zip_map(self.value(a), self.value(b), |x, y| x * y);
        self.push("hadamard", v, Op::Hadamard(a, b), &[a, b])
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(sigmoid);
        self.push("sigmoid", v, Op::Sigmoid(a), &[a])
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::tanh);
        self.push("tanh", v, Op::Tanh(a), &[a])
    }

    /// Softmax over all entries of a vector-shaped tensor.
    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let x = self.value(a);
        if x.rows() != 1 && x.cols() != 1 {
            return Err(Error::Shape {
                op: "softmax",
                detail: format!("expected a vector, got {}x{}", x.rows(), x.cols()),
            });
        }
        let v = softmax(x);
        self.push("softmax", v, Op::Softmax(a), &[a])
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * s);
        self.push("scale", v, Op::Scale(a, s), &[a])
    }

    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(a).data().iter().sum());
        self.push("sum", v, Op::Sum(a), &[a])
    }

    /// Stacks inputs vertically; all must have the same column count.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = self.value(parts[0]).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let t = self.value(p);
            if t.cols() != cols {
                return Err(shape_err("concat_rows", self.value(parts[0]), t));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        let v = Tensor::new(rows, cols, data)?;
        self.push("concat_rows", v, Op::ConcatRows(parts.to_vec()), parts)
    }

    /// Joins inputs side by side; all must have the same row count.
    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = self.value(parts[0]).rows();
        let mut cols = 0;
        for &p in parts {
            let t = self.value(p);
            if t.rows() != rows {
                return Err(shape_err("concat_cols", self.value(parts[0]), t));
            }
            cols += t.cols();
        }
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for &p in parts {
                data.extend_from_slice(self.value(p).row_slice(r));
            }
        }
        let v = Tensor::new(rows, cols, data)?;
        self.push("concat_cols", v, Op::ConcatCols(parts.to_vec()), parts)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).transpose();
        self.push("transpose", v, Op::Transpose(a), &[a])
    }

    /// Rows `start..start + len`.
    pub fn slice_rows(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.rows() {
            return Err(Error::Shape {
                op: "slice_rows",
                detail: format!("rows {start}..{} of {}", start + len, x.rows()),
            });
        }
        let v = Tensor::new(len, x.cols(), x.data()[start * x.cols()..(start + len) * x.cols()].to_vec())?;
        self.push("slice_rows", v, Op::SliceRows(a, start), &[a])
    }

    /// Columns `start..start + len`.
    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Result<Var> {
        let x = self.value(a);
        if start + len > x.cols() {
            return Err(Error::Shape {
                op: "slice_cols",
                detail: format!("cols {start}..{} of {}", start + len, x.cols()),
            });
        }
        let mut data = Vec::with_capacity(x.rows() * len);
        for r in 0..x.rows() {
            data.extend_from_slice(&x.row_slice(r)[start..start + len]);
        }
        let v = Tensor::new(x.rows(), len, data)?;
        self.push("slice_cols", v, Op::SliceCols(a, start), &[a])
    }

    /// Row `t` of the result is the sum of the rows of `table` listed in
    /// `indices[t]`, i.e. the product of a sparse multi-hot matrix with `table`.
    pub fn embed_sum(&mut self, table: Var, indices: &[Vec<u32>]) -> Result<Var> {
        let w = self.value(table);
        let e = w.cols();
        let mut out = Tensor::zeros(indices.len(), e);
        for (t, idx) in indices.iter().enumerate() {
            for &i in idx {
                if i as usize >= w.rows() {
                    return Err(Error::Shape {
                        op: "embed_sum",
                        detail: format!("index {i} outside a table of {} rows", w.rows()),
                    });
                }
                let src = w.row_slice(i as usize);
                for (o, s) in out.data_mut()[t * e..(t + 1) * e].iter_mut().zip(src) {
                    *o += s;
                }
            }
        }
        self.push("embed_sum", out, Op::EmbedSum(table, indices.to_vec()), &[table])
    }

    /// Weighted binary cross-entropy of predictions in `(0, 1)`, as a 1×1 node.
    pub fn weighted_bce(&mut self, pred: Var, targets: &[f64], w_pos: f64, w_neg: f64) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != targets.len() {
            return Err(Error::Shape {
                op: "weighted_bce",
                detail: format!("{} predictions, {} targets", p.len(), targets.len()),
            });
        }
        let v = Tensor::scalar(weighted_bce(p.data(), targets, w_pos, w_neg));
        let op = Op::WeightedBce { pred, targets: targets.to_vec(), w_pos, w_neg };
        self.push("weighted_bce", v, op, &[pred])
    }

    /// Reverse pass from a scalar node. Leaf gradients are added to what
    /// earlier calls left behind.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let l = self.value(loss);
        if l.len() != 1 {
            return Err(Error::NotScalar { rows: l.rows(), cols: l.cols() });
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.requires_grad {
                continue;
            }
            let mut send = |v: Var, t: Tensor| {
                if self.nodes[v.0].requires_grad {
                    match &mut grads[v.0] {
                        Some(acc) => acc.add_assign(&t),
                        slot => *slot = Some(t),
                    }
                }
            };
            let val = &node.value;
            match &node.op {
                Op::Leaf => {
                    match &mut self.leaf_grads[id] {
                        Some(acc) => acc.add_assign(&g),
                        slot => *slot = Some(g),
                    }
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
                    let ga = g.matmul_nt(bv);
                    let gb = av.matmul_tn(&g);
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Add(a, b) => {
                    send(*a, g.clone());
                    send(*b, g);
                }
                Op::AddRow(a, r) => {
                    let c = g.cols();
                    let mut gr = Tensor::zeros(1, c);
                    for (i, v) in g.data().iter().enumerate() {
                        gr.data_mut()[i % c] += v;
                    }
                    send(*a, g);
                    send(*r, gr);
                }
                Op::Sub(a, b) => {
                    send(*a, g.clone());
                    send(*b, g.map(|v| -v));
                }
                Op::Hadamard(a, b) => {
                    let ga = zip_map(&g, &self.nodes[b.0].value, |x, y| x * y);
                    let gb = zip_map(&g, &self.nodes[a.0].value, |x, y| x * y);
                    send(*a, ga);
                    send(*b, gb);
                }
                Op::Sigmoid(a) => send(*a, zip_map(&g, val, |g, y| g * y * (1.0 - y))),
                Op::Tanh(a) => send(*a, zip_map(&g, val, |g, y| g * (1.0 - y * y))),
                Op::Softmax(a) => {
                    let dot: f64 = g.data().iter().zip(val.data()).map(|(x, y)| x * y).sum();
                    send(*a, zip_map(&g, val, |g, y| y * (g - dot)));
                }
                Op::Scale(a, s) => send(*a, g.map(|v| v * s)),
                Op::Sum(a) => {
                    let x = &self.nodes[a.0].value;
                    send(*a, Tensor::filled(x.rows(), x.cols(), g.data()[0]));
                }
                Op::ConcatRows(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let (r, c) = self.nodes[p.0].value.shape();
                        let piece = g.data()[start * c..(start + r) * c].to_vec();
                        send(*p, Tensor { rows: r, cols: c, data: piece });
                        start += r;
                    }
                }
                Op::ConcatCols(parts) => {
                    let mut start = 0;
                    for p in parts {
                        let (r, c) = self.nodes[p.0].value.shape();
                        let mut piece = Vec::with_capacity(r * c);
                        for row in 0..r {
                            piece.extend_from_slice(&g.row_slice(row)[start..start + c]);
                        }
                        send(*p, Tensor { rows: r, cols: c, data: piece });
                        start += c;
                    }
                }
                Op::Transpose(a) => send(*a, g.transpose()),
                Op::SliceRows(a, start) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    let mut full = Tensor::zeros(r, c);
                    full.data_mut()[start * c..start * c + g.len()].copy_from_slice(g.data());
                    send(*a, full);
                }
                Op::SliceCols(a, start) => {
                    let (r, c) = self.nodes[a.0].value.shape();
                    let mut full = Tensor::zeros(r, c);
                    let len = g.cols();
                    for row in 0..r {
                        full.data_mut()[row * c + start..row * c + start + len]
                            .copy_from_slice(g.row_slice(row));
                    }
                    send(*a, full);
                }
                Op::EmbedSum(table, indices) => {
                    let (r, e) = self.nodes[table.0].value.shape();
                    let mut full = Tensor::zeros(r, e);
                    for (t, idx) in indices.iter().enumerate() {
                        for &i in idx {
                            let i = i as usize;
                            for (o, s) in full.data_mut()[i * e..(i + 1) * e].iter_mut().zip(g.row_slice(t)) {
                                *o += s;
                            }
                        }
                    }
                    send(*table, full);
                }
                Op::WeightedBce { pred, targets, w_pos, w_neg } => {
                    let p = &self.nodes[pred.0].value;
                    let n = targets.len().max(1) as f64;
                    let scale = g.data()[0] / n;
                    let data = p
                        .data()
                        .iter()
                        .zip(targets)
                        .map(|(&p, &t)| {
                            let p = p.clamp(BCE_EPS, 1.0 - BCE_EPS);
                            -scale * (w_pos * t / p - w_neg * (1.0 - t) / (1.0 - p))
                        })
                        .collect();
                    send(*pred, Tensor { rows: p.rows(), cols: p.cols(), data });
                }
            }
        }
        Ok(())
    }
}
