//! Reverse-mode automatic differentiation over dense matrices.
//!
//! A [`Tape`] is an append-only list of nodes. Each node owns its forward
//! value and remembers the operation and the input handles that produced it,
//! so node order is always a topological order. [`Tape::backward`] walks the
//! list once in reverse and accumulates adjoints into every tracked node.
//!
//! Nodes created with [`Tape::leaf`] are tracked; nodes created with
//! [`Tape::constant`] are not, and nothing downstream of only constants is
//! tracked either.

use std::hash::{DefaultHasher, Hash, Hasher};
use std::sync::Arc;

use super::dense::gemm;
use super::{CsrMatrix, Tensor, TensorError};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

enum Op {
    Input,
    MatMul(Var, Var),
    SpMM(Arc<CsrMatrix>, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    RowwiseMax { inputs: Vec<Var>, argmax: Vec<u32> },
    Relu(Var),
    Sigmoid(Var),
    Tanh(Var),
    LeakyRelu(Var, f64),
    Map { x: Var, deriv: Vec<f64> },
    GatAggregate(Box<GatState>),
    SoftmaxCrossEntropy(Box<CrossEntropyState>),
    Sum(Var),
}

struct GatState {
    adj: Arc<CsrMatrix>,
    h: Var,
    left: Var,
    right: Var,
    slope: f64,
    normalize: bool,
    raw: Vec<f64>,
    alpha: Vec<f64>,
}

struct CrossEntropyState {
    logits: Var,
    rows: Vec<usize>,
    targets: Vec<usize>,
    probs: Vec<f64>,
}

struct Node {
    value: Tensor,
    op: Op,
    tracked: bool,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by one reverse sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of a leaf. Intermediate adjoints are released during the
    /// sweep, so this is `None` for them and for untracked nodes.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(|g| g.take())
    }
}

fn dim_err(op: &'static str, got: (usize, usize), expected: (usize, usize)) -> TensorError {
    TensorError::Dimension { op, got, expected }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
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

    fn push(&mut self, value: Tensor, op: Op, tracked: bool) -> Var {
        self.nodes.push(Node { value, op, tracked });
        Var(self.nodes.len() - 1)
    }

    fn tracked(&self, v: Var) -> bool {
        self.nodes[v.0].tracked
    }

    /// A differentiable input (a trainable parameter or a checked input).
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, true)
    }

    /// A non-differentiable input.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Input, false)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.cols() != bv.rows() {
            return Err(dim_err("matmul", bv.shape(), (av.cols(), bv.cols())));
        }
        let mut out = Tensor::zeros(av.rows(), bv.cols());
        gemm(av, false, bv, false, &mut out, 0.0);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::MatMul(a, b), tracked))
    }

    /// Sparse-times-dense product with a constant sparse operand.
    pub fn spmm(&mut self, adj: &Arc<CsrMatrix>, x: Var) -> Result<Var, TensorError> {
        let out = adj.spmm(self.value(x))?;
        let tracked = self.tracked(x);
        Ok(self.push(out, Op::SpMM(Arc::clone(adj), x), tracked))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(dim_err("add", bv.shape(), av.shape()));
        }
        let mut out = av.clone();
        out.add_assign(bv);
        let tracked = self.tracked(a) || self.tracked(b);
        Ok(self.push(out, Op::Add(a, b), tracked))
    }

    /// Adds a `1 x cols` row vector to every row of `a`.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var, TensorError> {
        let (av, bv) = (self.value(a), self.value(bias));
        if bv.shape() != (1, av.cols()) {
            return Err(dim_err("add_row", bv.shape(), (1, av.cols())));
        }
        let mut out = av.clone();
        for r in 0..out.rows() {
            for (o, b) in out.row_mut(r).iter_mut().zip(bv.data()) {
                *o += b;
            }
        }
        let tracked = self.tracked(a) || self.tracked(bias);
        Ok(self.push(out, Op::AddRow(a, bias), tracked))
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let out = self.value(a).map(|x| x * factor);
        let tracked = self.tracked(a);
        self.push(out, Op::Scale(a, factor), tracked)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::EmptyOperandList("concat_cols"))?;
        let rows = self.value(first).rows();
        let mut cols = 0;
        for &p in parts {
            let s = self.shape(p);
            if s.0 != rows {
                return Err(dim_err("concat_cols", s, (rows, s.1)));
            }
            cols += s.1;
        }
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let orow = out.row_mut(r);
            let mut offset = 0;
            for &p in parts {
                let src = self.nodes[p.0].value.row(r);
                orow[offset..offset + src.len()].copy_from_slice(src);
                offset += src.len();
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::ConcatCols(parts.to_vec()), tracked))
    }

    /// Elementwise maximum across same-shaped operands. Ties go to the
    /// operand that appears first in `parts`.
    pub fn rowwise_max(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts.first().ok_or(TensorError::EmptyOperandList("rowwise_max"))?;
        let shape = self.shape(first);
        for &p in parts {
            if self.shape(p) != shape {
                return Err(dim_err("rowwise_max", self.shape(p), shape));
            }
        }
        let mut out = self.value(first).clone();
        let mut argmax = vec![0u32; out.len()];
        for (k, &p) in parts.iter().enumerate().skip(1) {
            for (i, &x) in self.nodes[p.0].value.data().iter().enumerate() {
                if x > out.data()[i] {
                    out.data_mut()[i] = x;
                    argmax[i] = k as u32;
                }
            }
        }
        let tracked = parts.iter().any(|&p| self.tracked(p));
        Ok(self.push(out, Op::RowwiseMax { inputs: parts.to_vec(), argmax }, tracked))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let out = self.value(x).map(|v| v.max(0.0));
        let tracked = self.tracked(x);
        self.push(out, Op::Relu(x), tracked)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let out = self.value(x).map(sigmoid);
        let tracked = self.tracked(x);
        self.push(out, Op::Sigmoid(x), tracked)
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        let out = self.value(x).map(f64::tanh);
        let tracked = self.tracked(x);
        self.push(out, Op::Tanh(x), tracked)
    }

    pub fn leaky_relu(&mut self, x: Var, slope: f64) -> Result<Var, TensorError> {
        if !(slope > 0.0 && slope < 1.0) {
            return Err(TensorError::InvalidArgument(format!("leaky_relu slope {slope} not in (0, 1)")));
        }
        let out = self.value(x).map(|v| leaky(v, slope));
        let tracked = self.tracked(x);
        Ok(self.push(out, Op::LeakyRelu(x, slope), tracked))
    }

    pub fn identity(&mut self, x: Var) -> Var {
        x
    }

    /// Elementwise map with a caller-supplied derivative.
    pub fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64) -> Var {
        let xv = self.value(x);
        let out = xv.map(&f);
        let deriv = xv.data().iter().map(|&v| df(v)).collect();
        let tracked = self.tracked(x);
        self.push(out, Op::Map { x, deriv }, tracked)
    }

    /// Attention-weighted neighbor aggregation.
    ///
    /// For every stored entry `(u, v)` of `adj` the raw score is
    /// `left[u] + right[v]`, passed through a leaky ReLU and normalized by a
    /// softmax over the entries of row `u` (skipped when `normalize` is
    /// false). Row `u` of the output is the coefficient-weighted sum of rows
    /// `h[v]`. The values stored in `adj` are ignored; only its pattern
    /// matters.
    pub fn gat_aggregate(
        &mut self,
        adj: &Arc<CsrMatrix>,
        h: Var,
        left: Var,
        right: Var,
        slope: f64,
        normalize: bool,
    ) -> Result<Var, TensorError> {
        let n = adj.rows();
        let hv = self.value(h);
        if adj.cols() != n || hv.rows() != n {
            return Err(dim_err("gat_aggregate", hv.shape(), (n, hv.cols())));
        }
        for side in [left, right] {
            if self.shape(side) != (n, 1) {
                return Err(dim_err("gat_aggregate", self.shape(side), (n, 1)));
            }
        }
        let lv = self.value(left).data();
        let rv = self.value(right).data();
        let mut raw = Vec::with_capacity(adj.nnz());
        let mut alpha = Vec::with_capacity(adj.nnz());
        let k = hv.cols();
        let mut out = Tensor::zeros(n, k);
        for u in 0..n {
            let cols = adj.row_indices(u);
            let start = raw.len();
            let mut max = f64::NEG_INFINITY;
            for &v in cols {
                let r = lv[u] + rv[v];
                raw.push(r);
                max = max.max(leaky(r, slope));
            }
            let mut denom = 0.0;
            for &r in &raw[start..] {
                let e = if normalize { (leaky(r, slope) - max).exp() } else { leaky(r, slope) };
                alpha.push(e);
                denom += e;
            }
            if !normalize {
                denom = 1.0;
            }
            let orow = out.row_mut(u);
            for (a, &v) in alpha[start..].iter_mut().zip(cols) {
                *a /= denom;
                for (o, &x) in orow.iter_mut().zip(hv.row(v)) {
                    *o += *a * x;
                }
            }
        }
        let tracked = self.tracked(h) || self.tracked(left) || self.tracked(right);
        let state = GatState { adj: Arc::clone(adj), h, left, right, slope, normalize, raw, alpha };
        Ok(self.push(out, Op::GatAggregate(Box::new(state)), tracked))
    }

    /// Mean over `rows` of `-log softmax(logits[r])[labels[r]]`, as a `1 x 1`
    /// node. `labels` is indexed by row of `logits`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize], rows: &[usize]) -> Result<Var, TensorError> {
        if rows.is_empty() {
            return Err(TensorError::EmptyMask);
        }
        let lv = self.value(logits);
        if labels.len() != lv.rows() {
            return Err(dim_err("softmax_cross_entropy", (labels.len(), 1), (lv.rows(), 1)));
        }
        let classes = lv.cols();
        let mut probs = Vec::with_capacity(rows.len() * classes);
        let mut targets = Vec::with_capacity(rows.len());
        let mut total = 0.0;
        for &r in rows {
            if r >= lv.rows() {
                return Err(dim_err("softmax_cross_entropy", (r, 0), (lv.rows(), classes)));
            }
            let label = labels[r];
            if label >= classes {
                return Err(TensorError::LabelOutOfRange { label, classes });
            }
            let row = lv.row(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = row.iter().map(|&z| (z - max).exp()).sum();
            let lse = max + sum.ln();
            total += lse - row[label];
            probs.extend(row.iter().map(|&z| (z - lse).exp()));
            targets.push(label);
        }
        let loss = Tensor::scalar(total / rows.len() as f64);
        let tracked = self.tracked(logits);
        let state = CrossEntropyState { logits, rows: rows.to_vec(), targets, probs };
        Ok(self.push(loss, Op::SoftmaxCrossEntropy(Box::new(state)), tracked))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let total = self.value(x).data().iter().sum();
        let tracked = self.tracked(x);
        self.push(Tensor::scalar(total), Op::Sum(x), tracked)
    }

    /// Hash of every branch taken by a non-smooth operation (ReLU and leaky
    /// ReLU sides, max winners). Two evaluations with equal signatures lie on
    /// the same smooth piece of the recorded function.
    pub fn branch_signature(&self) -> u64 {
        let mut h = DefaultHasher::new();
        for node in &self.nodes {
            match &node.op {
                Op::Relu(x) | Op::LeakyRelu(x, _) => {
                    for &v in self.nodes[x.0].value.data() {
                        (v > 0.0).hash(&mut h);
                    }
                }
                Op::RowwiseMax { argmax, .. } => argmax.hash(&mut h),
                Op::GatAggregate(s) => {
                    for &r in &s.raw {
                        (r > 0.0).hash(&mut h);
                    }
                }
                _ => {}
            }
        }
        h.finish()
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients, TensorError> {
        let shape = self.shape(loss);
        if shape != (1, 1) {
            return Err(TensorError::NonScalarLoss(shape));
        }
        self.backward_with(loss, Tensor::scalar(1.0))
    }

    /// Reverse sweep seeded with an arbitrary adjoint for `output`.
    pub fn backward_with(&self, output: Var, seed: Tensor) -> Result<Gradients, TensorError> {
        if seed.shape() != self.shape(output) {
            return Err(dim_err("backward", seed.shape(), self.shape(output)));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(seed);
        for i in (0..=output.0).rev() {
            let node = &self.nodes[i];
            if !node.tracked || matches!(node.op, Op::Input) {
                continue;
            }
            let Some(g) = grads[i].take() else { continue };
            self.propagate(node, &g, &mut grads);
        }
        Ok(Gradients { grads })
    }

    fn grad_buf<'a>(&self, grads: &'a mut [Option<Tensor>], v: Var) -> Option<&'a mut Tensor> {
        if !self.tracked(v) {
            return None;
        }
        let (r, c) = self.shape(v);
        Some(grads[v.0].get_or_insert_with(|| Tensor::zeros(r, c)))
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Input => {}
            Op::MatMul(a, b) => {
                let (av, bv) = (self.value(*a), self.value(*b));
                if let Some(ga) = self.grad_buf(grads, *a) {
                    gemm(g, false, bv, true, ga, 1.0);
                }
                if let Some(gb) = self.grad_buf(grads, *b) {
                    gemm(av, true, g, false, gb, 1.0);
                }
            }
            Op::SpMM(adj, x) => {
                if let Some(gx) = self.grad_buf(grads, *x) {
                    adj.spmm_transpose_acc(g, gx);
                }
            }
            Op::Add(a, b) => {
                for v in [*a, *b] {
                    if let Some(gv) = self.grad_buf(grads, v) {
                        gv.add_assign(g);
                    }
                }
            }
            Op::AddRow(a, bias) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    ga.add_assign(g);
                }
                if let Some(gb) = self.grad_buf(grads, *bias) {
                    for r in 0..g.rows() {
                        for (o, &x) in gb.data_mut().iter_mut().zip(g.row(r)) {
                            *o += x;
                        }
                    }
                }
            }
            Op::Scale(a, factor) => {
                if let Some(ga) = self.grad_buf(grads, *a) {
                    for (o, &x) in ga.data_mut().iter_mut().zip(g.data()) {
                        *o += factor * x;
                    }
                }
            }
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p).1;
                    if let Some(gp) = self.grad_buf(grads, p) {
                        for r in 0..g.rows() {
                            for (o, &x) in gp.row_mut(r).iter_mut().zip(&g.row(r)[offset..offset + w]) {
                                *o += x;
                            }
                        }
                    }
                    offset += w;
                }
            }
            Op::RowwiseMax { inputs, argmax } => {
                for (k, &p) in inputs.iter().enumerate() {
                    if let Some(gp) = self.grad_buf(grads, p) {
                        for (i, o) in gp.data_mut().iter_mut().enumerate() {
                            if argmax[i] as usize == k {
                                *o += g.data()[i];
                            }
                        }
                    }
                }
            }
            Op::Relu(x) => {
                let xv = self.value(*x);
                if let Some(gx) = self.grad_buf(grads, *x) {
                    for ((o, &gi), &xi) in gx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                        if xi > 0.0 {
                            *o += gi;
                        }
                    }
                }
            }
            Op::LeakyRelu(x, slope) => {
                let xv = self.value(*x);
                if let Some(gx) = self.grad_buf(grads, *x) {
                    for ((o, &gi), &xi) in gx.data_mut().iter_mut().zip(g.data()).zip(xv.data()) {
                        *o += if xi > 0.0 { gi } else { slope * gi };
                    }
                }
            }
            Op::Sigmoid(x) => {
                if let Some(gx) = self.grad_buf(grads, *x) {
                    for ((o, &gi), &s) in gx.data_mut().iter_mut().zip(g.data()).zip(node.value.data()) {
                        *o += gi * s * (1.0 - s);
                    }
                }
            }
            Op::Tanh(x) => {
                if let Some(gx) = self.grad_buf(grads, *x) {
                    for ((o, &gi), &t) in gx.data_mut().iter_mut().zip(g.data()).zip(node.value.data()) {
                        *o += gi * (1.0 - t * t);
                    }
                }
            }
            Op::Map { x, deriv } => {
                if let Some(gx) = self.grad_buf(grads, *x) {
                    for ((o, &gi), &d) in gx.data_mut().iter_mut().zip(g.data()).zip(deriv) {
                        *o += gi * d;
                    }
                }
            }
            Op::GatAggregate(s) => self.propagate_gat(s, g, grads),
            Op::SoftmaxCrossEntropy(s) => {
                let classes = self.shape(s.logits).1;
                let scale = g.item() / s.rows.len() as f64;
                if let Some(gl) = self.grad_buf(grads, s.logits) {
                    for (i, (&r, &t)) in s.rows.iter().zip(&s.targets).enumerate() {
                        let p = &s.probs[i * classes..(i + 1) * classes];
                        let grow = gl.row_mut(r);
                        for (j, (o, &pj)) in grow.iter_mut().zip(p).enumerate() {
                            *o += scale * (pj - if j == t { 1.0 } else { 0.0 });
                        }
                    }
                }
            }
            Op::Sum(x) => {
                let gi = g.item();
                if let Some(gx) = self.grad_buf(grads, *x) {
                    for o in gx.data_mut() {
                        *o += gi;
                    }
                }
            }
        }
    }

    fn propagate_gat(&self, s: &GatState, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let adj = &s.adj;
        let hv = self.value(s.h);
        let n = adj.rows();
        let mut d_left = vec![0.0; n];
        let mut d_right = vec![0.0; n];
        let mut d_h = self.tracked(s.h).then(|| Tensor::zeros(hv.rows(), hv.cols()));
        let mut d_alpha = Vec::new();
        for u in 0..n {
            let (lo, hi) = (adj.indptr()[u], adj.indptr()[u + 1]);
            let cols = adj.row_indices(u);
            let gu = g.row(u);
            d_alpha.clear();
            d_alpha.extend(cols.iter().map(|&v| gu.iter().zip(hv.row(v)).map(|(a, b)| a * b).sum::<f64>()));
            let alpha = &s.alpha[lo..hi];
            let weighted: f64 = if s.normalize { alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum() } else { 0.0 };
            for (j, &v) in cols.iter().enumerate() {
                if let Some(dh) = d_h.as_mut() {
                    for (o, &x) in dh.row_mut(v).iter_mut().zip(gu) {
                        *o += alpha[j] * x;
                    }
                }
                let d_score = if s.normalize { alpha[j] * (d_alpha[j] - weighted) } else { d_alpha[j] };
                let d_raw = if s.raw[lo + j] > 0.0 { d_score } else { s.slope * d_score };
                d_left[u] += d_raw;
                d_right[v] += d_raw;
            }
        }
        if let (Some(dh), Some(buf)) = (d_h, self.grad_buf(grads, s.h)) {
            buf.add_assign(&dh);
        }
        if let Some(buf) = self.grad_buf(grads, s.left) {
            for (o, d) in buf.data_mut().iter_mut().zip(d_left) {
                *o += d;
            }
        }
        if let Some(buf) = self.grad_buf(grads, s.right) {
            for (o, d) in buf.data_mut().iter_mut().zip(d_right) {
                *o += d;
            }
        }
    }
}
