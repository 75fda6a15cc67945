//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! A [`Tape`] records every operation as it executes; [`Tape::backward`]
//! replays the records in reverse and accumulates gradients into every
//! tensor that requires them. There is no broadcasting: shapes must match
//! exactly, and any mismatch is an error rather than a silent expansion.

use thiserror::Error;

/// Numerical floor for `log` inputs inside the cross-entropy loss.
const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    DimensionMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: index {index} out of range for size {size}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        size: usize,
    },
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

/// A dense, row-major, n-dimensional array of f64 values.
///
/// Plain value type: model parameters, checkpoints, and test fixtures hold
/// these directly. Gradient bookkeeping lives on the [`Tape`], not here.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(TensorError::ContractViolation(format!(
                "shape {:?} implies {} elements but data has {}",
                shape,
                numel,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let numel = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; numel],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![],
            data: vec![value],
        }
    }

    pub fn from_vec(data: Vec<f64>) -> Self {
        Tensor {
            shape: vec![data.len()],
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }
}

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TensorId(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul { a: TensorId, b: TensorId },
    Tanh { x: TensorId },
    Sigmoid { x: TensorId },
    Add { a: TensorId, b: TensorId },
    Mul { a: TensorId, b: TensorId },
    /// Last-dimension concatenation; `split` is the width of `a`.
    ConcatCols { a: TensorId, b: TensorId, split: usize },
    /// Vertical concatenation of equal-width parts, with their row counts.
    ConcatRows { parts: Vec<(TensorId, usize)> },
    SliceCols { x: TensorId, start: usize, end: usize },
    GatherRows { table: TensorId, ids: Vec<usize> },
    AddBiasRows { x: TensorId, bias: TensorId },
    SoftmaxRows { x: TensorId },
    SparseCrossEntropy {
        probs: TensorId,
        targets: Vec<usize>,
        mask: Vec<bool>,
    },
    Reshape { x: TensorId },
    Sum { x: TensorId },
}

struct Node {
    value: Tensor,
    grad: Option<Vec<f64>>,
    requires_grad: bool,
    op: Op,
}

/// Records operations in execution order for reverse-mode differentiation.
///
/// A tape and its tensors form a single-threaded unit; independent tapes
/// share nothing and may run in parallel.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    /// Insert a leaf tensor. Leaves with `requires_grad` receive gradients
    /// during [`Tape::backward`].
    pub fn leaf(&mut self, value: Tensor, requires_grad: bool) -> TensorId {
        self.push(value, requires_grad, Op::Leaf)
    }

    pub fn value(&self, id: TensorId) -> &Tensor {
        &self.nodes[id.0].value
    }

    pub fn shape(&self, id: TensorId) -> &[usize] {
        self.nodes[id.0].value.shape()
    }

    pub fn data(&self, id: TensorId) -> &[f64] {
        self.nodes[id.0].value.data()
    }

    /// Gradient of `id`, populated by [`Tape::backward`]. Tensors that do
    /// not require gradients return `None`.
    pub fn grad(&self, id: TensorId) -> Option<&[f64]> {
        self.nodes[id.0].grad.as_deref()
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> TensorId {
        let id = TensorId(self.nodes.len());
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        id
    }

    fn push_op(&mut self, value: Tensor, inputs: &[TensorId], op: Op) -> TensorId {
        let requires_grad = inputs.iter().any(|i| self.nodes[i.0].requires_grad);
        self.push(value, requires_grad, op)
    }

    /// Matrix product of `a` `[m×k]` and `b` `[k×n]`.
    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        if ash.len() != 2 || bsh.len() != 2 || ash[1] != bsh[0] {
            return Err(TensorError::DimensionMismatch {
                op: "matmul",
                lhs: ash,
                rhs: bsh,
            });
        }
        let (m, k, n) = (ash[0], ash[1], bsh[1]);
        let out = matmul_raw(self.data(a), self.data(b), m, k, n);
        Ok(self.push_op(
            Tensor {
                shape: vec![m, n],
                data: out,
            },
            &[a, b],
            Op::MatMul { a, b },
        ))
    }

    pub fn tanh(&mut self, x: TensorId) -> TensorId {
        let value = Tensor {
            shape: self.shape(x).to_vec(),
            data: self.data(x).iter().map(|v| v.tanh()).collect(),
        };
        self.push_op(value, &[x], Op::Tanh { x })
    }

    pub fn sigmoid(&mut self, x: TensorId) -> TensorId {
        let value = Tensor {
            shape: self.shape(x).to_vec(),
            data: self.data(x).iter().map(|&v| stable_sigmoid(v)).collect(),
        };
        self.push_op(value, &[x], Op::Sigmoid { x })
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.elementwise(a, b, "add", |x, y| x + y, |a, b| Op::Add { a, b })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.elementwise(a, b, "mul", |x, y| x * y, |a, b| Op::Mul { a, b })
    }

    fn elementwise(
        &mut self,
        a: TensorId,
        b: TensorId,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
        op: impl Fn(TensorId, TensorId) -> Op,
    ) -> Result<TensorId, TensorError> {
        if self.shape(a) != self.shape(b) {
            return Err(TensorError::DimensionMismatch {
                op: name,
                lhs: self.shape(a).to_vec(),
                rhs: self.shape(b).to_vec(),
            });
        }
        let value = Tensor {
            shape: self.shape(a).to_vec(),
            data: self
                .data(a)
                .iter()
                .zip(self.data(b))
                .map(|(x, y)| f(*x, *y))
                .collect(),
        };
        Ok(self.push_op(value, &[a, b], op(a, b)))
    }

    /// Concatenate along the last dimension; all leading dimensions must
    /// agree. Backward splits the gradient at the width of `a`.
    pub fn concat_last_dim(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (ash, bsh) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        let lead_ok = ash.len() == bsh.len()
            && !ash.is_empty()
            && ash[..ash.len() - 1] == bsh[..bsh.len() - 1];
        if !lead_ok {
            return Err(TensorError::DimensionMismatch {
                op: "concat_last_dim",
                lhs: ash,
                rhs: bsh,
            });
        }
        let p = ash[ash.len() - 1];
        let q = bsh[bsh.len() - 1];
        let rows: usize = ash[..ash.len() - 1].iter().product();
        let mut data = Vec::with_capacity(rows * (p + q));
        for r in 0..rows {
            data.extend_from_slice(&self.data(a)[r * p..(r + 1) * p]);
            data.extend_from_slice(&self.data(b)[r * q..(r + 1) * q]);
        }
        let mut shape = ash.clone();
        *shape.last_mut().unwrap() = p + q;
        Ok(self.push_op(
            Tensor { shape, data },
            &[a, b],
            Op::ConcatCols { a, b, split: p },
        ))
    }

    /// Stack 2-d parts vertically; every part must have the same width.
    pub fn concat_rows(&mut self, parts: &[TensorId]) -> Result<TensorId, TensorError> {
        if parts.is_empty() {
            return Err(TensorError::ContractViolation(
                "concat_rows requires at least one part".into(),
            ));
        }
        let width = self.shape(parts[0]).last().copied().unwrap_or(0);
        let mut data = Vec::new();
        let mut counts = Vec::with_capacity(parts.len());
        let mut rows = 0;
        for &p in parts {
            let sh = self.shape(p);
            if sh.len() != 2 || sh[1] != width {
                return Err(TensorError::DimensionMismatch {
                    op: "concat_rows",
                    lhs: self.shape(parts[0]).to_vec(),
                    rhs: sh.to_vec(),
                });
            }
            rows += sh[0];
            counts.push((p, sh[0]));
            data.extend_from_slice(self.data(p));
        }
        Ok(self.push_op(
            Tensor {
                shape: vec![rows, width],
                data,
            },
            parts,
            Op::ConcatRows { parts: counts },
        ))
    }

    /// Columns `[start, end)` of a 2-d tensor.
    pub fn slice_cols(
        &mut self,
        x: TensorId,
        start: usize,
        end: usize,
    ) -> Result<TensorId, TensorError> {
        let sh = self.shape(x).to_vec();
        if sh.len() != 2 || start > end || end > sh[1] {
            return Err(TensorError::IndexOutOfRange {
                op: "slice_cols",
                index: end,
                size: *sh.last().unwrap_or(&0),
            });
        }
        let (rows, cols) = (sh[0], sh[1]);
        let mut data = Vec::with_capacity(rows * (end - start));
        for r in 0..rows {
            data.extend_from_slice(&self.data(x)[r * cols + start..r * cols + end]);
        }
        Ok(self.push_op(
            Tensor {
                shape: vec![rows, end - start],
                data,
            },
            &[x],
            Op::SliceCols { x, start, end },
        ))
    }

    /// Row-gather from a `[V×D]` table. Backward scatters additively into
    /// the table, so repeated ids accumulate.
    pub fn gather_rows(&mut self, table: TensorId, ids: &[usize]) -> Result<TensorId, TensorError> {
        let sh = self.shape(table).to_vec();
        if sh.len() != 2 {
            return Err(TensorError::DimensionMismatch {
                op: "gather_rows",
                lhs: sh,
                rhs: vec![ids.len()],
            });
        }
        let (v, d) = (sh[0], sh[1]);
        let mut data = Vec::with_capacity(ids.len() * d);
        for &id in ids {
            if id >= v {
                return Err(TensorError::IndexOutOfRange {
                    op: "gather_rows",
                    index: id,
                    size: v,
                });
            }
            data.extend_from_slice(&self.data(table)[id * d..(id + 1) * d]);
        }
        Ok(self.push_op(
            Tensor {
                shape: vec![ids.len(), d],
                data,
            },
            &[table],
            Op::GatherRows {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Add a 1-d bias of width `d` to every row of a `[t×d]` tensor.
    pub fn add_bias_rows(&mut self, x: TensorId, bias: TensorId) -> Result<TensorId, TensorError> {
        let (xsh, bsh) = (self.shape(x).to_vec(), self.shape(bias).to_vec());
        if xsh.len() != 2 || bsh.len() != 1 || xsh[1] != bsh[0] {
            return Err(TensorError::DimensionMismatch {
                op: "add_bias_rows",
                lhs: xsh,
                rhs: bsh,
            });
        }
        let (rows, cols) = (xsh[0], xsh[1]);
        let mut data = self.data(x).to_vec();
        for r in 0..rows {
            for c in 0..cols {
                data[r * cols + c] += self.data(bias)[c];
            }
        }
        Ok(self.push_op(
            Tensor { shape: xsh, data },
            &[x, bias],
            Op::AddBiasRows { x, bias },
        ))
    }

    /// Row-wise softmax of a `[t×c]` tensor, computed with max subtraction
    /// so that large or equal logits stay finite.
    pub fn softmax_rows(&mut self, x: TensorId) -> Result<TensorId, TensorError> {
        let sh = self.shape(x).to_vec();
        if sh.len() != 2 || sh[1] == 0 {
            return Err(TensorError::DimensionMismatch {
                op: "softmax_rows",
                lhs: sh,
                rhs: vec![],
            });
        }
        let (rows, cols) = (sh[0], sh[1]);
        let mut data = vec![0.0; rows * cols];
        for r in 0..rows {
            let row = &self.data(x)[r * cols..(r + 1) * cols];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for c in 0..cols {
                let e = (row[c] - max).exp();
                data[r * cols + c] = e;
                sum += e;
            }
            for c in 0..cols {
                data[r * cols + c] /= sum;
            }
        }
        Ok(self.push_op(Tensor { shape: sh, data }, &[x], Op::SoftmaxRows { x }))
    }

    /// Mean of `−log probs[i][targets[i]]` over unmasked positions; masked
    /// positions contribute nothing. Log inputs are clamped to ≥ 1e-12.
    pub fn sparse_cross_entropy(
        &mut self,
        probs: TensorId,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<TensorId, TensorError> {
        let sh = self.shape(probs).to_vec();
        if sh.len() != 2 || sh[0] != targets.len() || sh[0] != mask.len() {
            return Err(TensorError::DimensionMismatch {
                op: "sparse_cross_entropy",
                lhs: sh,
                rhs: vec![targets.len(), mask.len()],
            });
        }
        let (rows, cols) = (sh[0], sh[1]);
        let n_unmasked = mask.iter().filter(|m| **m).count();
        if n_unmasked == 0 {
            return Err(TensorError::ContractViolation(
                "sparse_cross_entropy: all positions are masked".into(),
            ));
        }
        let mut total = 0.0;
        for r in 0..rows {
            if !mask[r] {
                continue;
            }
            if targets[r] >= cols {
                return Err(TensorError::IndexOutOfRange {
                    op: "sparse_cross_entropy",
                    index: targets[r],
                    size: cols,
                });
            }
            let p = self.data(probs)[r * cols + targets[r]];
            total -= p.max(LOG_CLAMP).ln();
        }
        let value = Tensor::scalar(total / n_unmasked as f64);
        Ok(self.push_op(
            value,
            &[probs],
            Op::SparseCrossEntropy {
                probs,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
            },
        ))
    }

    /// Reinterpret the data under a new shape with the same element count.
    pub fn reshape(&mut self, x: TensorId, shape: Vec<usize>) -> Result<TensorId, TensorError> {
        let numel: usize = shape.iter().product();
        if numel != self.data(x).len() {
            return Err(TensorError::DimensionMismatch {
                op: "reshape",
                lhs: self.shape(x).to_vec(),
                rhs: shape,
            });
        }
        let value = Tensor {
            shape,
            data: self.data(x).to_vec(),
        };
        Ok(self.push_op(value, &[x], Op::Reshape { x }))
    }

    /// Sum of all elements, as a scalar.
    pub fn sum(&mut self, x: TensorId) -> TensorId {
        let value = Tensor::scalar(self.data(x).iter().sum());
        self.push_op(value, &[x], Op::Sum { x })
    }

    /// Reverse pass from a scalar `loss`: allocates zeroed gradients for
    /// every tensor that requires them, then walks the tape backwards
    /// accumulating (`+=`) so fan-out adds up rather than overwriting.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if self.nodes[loss.0].value.numel() != 1 {
            return Err(TensorError::ContractViolation(format!(
                "backward requires a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        for node in &mut self.nodes {
            if node.requires_grad {
                node.grad = Some(vec![0.0; node.value.numel()]);
            }
        }
        if let Some(g) = &mut self.nodes[loss.0].grad {
            g[0] = 1.0;
        } else {
            // Loss does not depend on any parameter; nothing to do.
            return Ok(());
        }
        for i in (0..=loss.0).rev() {
            if self.nodes[i].grad.is_none() {
                continue;
            }
            self.backward_node(i);
        }
        Ok(())
    }

    fn backward_node(&mut self, i: usize) {
        let out_grad = self.nodes[i].grad.clone().unwrap();
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (a, b) = (*a, *b);
                let (m, k) = (self.shape(a)[0], self.shape(a)[1]);
                let n = self.shape(b)[1];
                if self.nodes[a.0].grad.is_some() {
                    // dA = dC · Bᵀ
                    let bd = self.data(b).to_vec();
                    let ga = self.nodes[a.0].grad.as_mut().unwrap();
                    for r in 0..m {
                        for j in 0..n {
                            let g = out_grad[r * n + j];
                            for p in 0..k {
                                ga[r * k + p] += g * bd[p * n + j];
                            }
                        }
                    }
                }
                if self.nodes[b.0].grad.is_some() {
                    // dB = Aᵀ · dC
                    let ad = self.data(a).to_vec();
                    let gb = self.nodes[b.0].grad.as_mut().unwrap();
                    for r in 0..m {
                        for p in 0..k {
                            let av = ad[r * k + p];
                            for j in 0..n {
                                gb[p * n + j] += av * out_grad[r * n + j];
                            }
                        }
                    }
                }
            }
            Op::Tanh { x } => {
                let x = *x;
                let out = self.nodes[i].value.data.clone();
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        gx[j] += g * (1.0 - out[j] * out[j]);
                    }
                }
            }
            Op::Sigmoid { x } => {
                let x = *x;
                let out = self.nodes[i].value.data.clone();
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        gx[j] += g * out[j] * (1.0 - out[j]);
                    }
                }
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                if let Some(ga) = self.nodes[a.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        ga[j] += g;
                    }
                }
                if let Some(gb) = self.nodes[b.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        gb[j] += g;
                    }
                }
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                let (ad, bd) = (self.data(a).to_vec(), self.data(b).to_vec());
                if let Some(ga) = self.nodes[a.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        ga[j] += g * bd[j];
                    }
                }
                if let Some(gb) = self.nodes[b.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        gb[j] += g * ad[j];
                    }
                }
            }
            Op::ConcatCols { a, b, split } => {
                let (a, b, p) = (*a, *b, *split);
                let total = self.nodes[i].value.shape.last().copied().unwrap();
                let q = total - p;
                let rows = out_grad.len() / total;
                if let Some(ga) = self.nodes[a.0].grad.as_mut() {
                    for r in 0..rows {
                        for c in 0..p {
                            ga[r * p + c] += out_grad[r * total + c];
                        }
                    }
                }
                if let Some(gb) = self.nodes[b.0].grad.as_mut() {
                    for r in 0..rows {
                        for c in 0..q {
                            gb[r * q + c] += out_grad[r * total + p + c];
                        }
                    }
                }
            }
            Op::ConcatRows { parts } => {
                let parts = parts.clone();
                let width = self.nodes[i].value.shape[1];
                let mut offset = 0;
                for (part, rows) in parts {
                    let len = rows * width;
                    if let Some(gp) = self.nodes[part.0].grad.as_mut() {
                        for j in 0..len {
                            gp[j] += out_grad[offset + j];
                        }
                    }
                    offset += len;
                }
            }
            Op::SliceCols { x, start, end } => {
                let (x, start, end) = (*x, *start, *end);
                let cols = self.shape(x)[1];
                let width = end - start;
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    let rows = out_grad.len() / width.max(1);
                    for r in 0..rows {
                        for c in 0..width {
                            gx[r * cols + start + c] += out_grad[r * width + c];
                        }
                    }
                }
            }
            Op::GatherRows { table, ids } => {
                let (table, ids) = (*table, ids.clone());
                let d = self.shape(table)[1];
                if let Some(gt) = self.nodes[table.0].grad.as_mut() {
                    for (r, id) in ids.iter().enumerate() {
                        for c in 0..d {
                            gt[id * d + c] += out_grad[r * d + c];
                        }
                    }
                }
            }
            Op::AddBiasRows { x, bias } => {
                let (x, bias) = (*x, *bias);
                let cols = self.shape(bias)[0];
                let rows = out_grad.len() / cols;
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        gx[j] += g;
                    }
                }
                if let Some(gb) = self.nodes[bias.0].grad.as_mut() {
                    for r in 0..rows {
                        for c in 0..cols {
                            gb[c] += out_grad[r * cols + c];
                        }
                    }
                }
            }
            Op::SoftmaxRows { x } => {
                let x = *x;
                let out = self.nodes[i].value.data.clone();
                let cols = self.nodes[i].value.shape[1];
                let rows = out.len() / cols;
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    for r in 0..rows {
                        let mut dot = 0.0;
                        for c in 0..cols {
                            dot += out_grad[r * cols + c] * out[r * cols + c];
                        }
                        for c in 0..cols {
                            gx[r * cols + c] +=
                                out[r * cols + c] * (out_grad[r * cols + c] - dot);
                        }
                    }
                }
            }
            Op::SparseCrossEntropy {
                probs,
                targets,
                mask,
            } => {
                let (probs, targets, mask) = (*probs, targets.clone(), mask.clone());
                let cols = self.shape(probs)[1];
                let n = mask.iter().filter(|m| **m).count() as f64;
                let pd = self.data(probs).to_vec();
                if let Some(gp) = self.nodes[probs.0].grad.as_mut() {
                    let g = out_grad[0];
                    for (r, (&t, &m)) in targets.iter().zip(&mask).enumerate() {
                        if !m {
                            continue;
                        }
                        let p = pd[r * cols + t];
                        if p >= LOG_CLAMP {
                            gp[r * cols + t] += g * (-1.0 / p) / n;
                        }
                    }
                }
            }
            Op::Reshape { x } => {
                let x = *x;
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    for (j, g) in out_grad.iter().enumerate() {
                        gx[j] += g;
                    }
                }
            }
            Op::Sum { x } => {
                let x = *x;
                if let Some(gx) = self.nodes[x.0].grad.as_mut() {
                    for g in gx.iter_mut() {
                        *g += out_grad[0];
                    }
                }
            }
        }
    }
}

fn stable_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn matmul_raw(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    for i in 0..m {
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] += av * brow[j];
            }
        }
    }
    c
}

/// Maximum relative error between the analytic gradient of `f` at `x` and
/// central finite differences, element by element:
/// `|analytic − numeric| / max(1e-8, |analytic| + |numeric|)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, TensorId) -> Result<TensorId, TensorError>,
{
    finite_diff_check_multi(|tape, ids| f(tape, ids[0]), std::slice::from_ref(x), eps)
}

/// Multi-input variant of [`finite_diff_check`]: the closure receives one
/// leaf per input tensor and must return the scalar loss.
pub fn finite_diff_check_multi<F>(f: F, inputs: &[Tensor], eps: f64) -> Result<f64, TensorError>
where
    F: Fn(&mut Tape, &[TensorId]) -> Result<TensorId, TensorError>,
{
    assert!(eps > 0.0, "finite_diff_check requires eps > 0");
    let eval = |tensors: &[Tensor]| -> Result<f64, TensorError> {
        let mut tape = Tape::new();
        let ids: Vec<TensorId> = tensors
            .iter()
            .map(|t| tape.leaf(t.clone(), false))
            .collect();
        let loss = f(&mut tape, &ids)?;
        Ok(tape.data(loss)[0])
    };

    // Analytic gradients from one backward pass.
    let mut tape = Tape::new();
    let ids: Vec<TensorId> = inputs.iter().map(|t| tape.leaf(t.clone(), true)).collect();
    let loss = f(&mut tape, &ids)?;
    tape.backward(loss)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| tape.grad(id).unwrap_or(&[]).to_vec())
        .collect();

    let mut worst = 0.0f64;
    let mut perturbed: Vec<Tensor> = inputs.to_vec();
    for (ti, input) in inputs.iter().enumerate() {
        for e in 0..input.numel() {
            let orig = input.data()[e];
            perturbed[ti].data_mut()[e] = orig + eps;
            let up = eval(&perturbed)?;
            perturbed[ti].data_mut()[e] = orig - eps;
            let down = eval(&perturbed)?;
            perturbed[ti].data_mut()[e] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[ti][e];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
