//! Define-by-run reverse-mode differentiation over [`Tensor`] values.
//!
//! Every builder method evaluates its result eagerly and appends a node,
//! so node ids are already a topological order. [`Graph::backward`] walks
//! the nodes once in reverse and sums contributions from every consumer.

use std::collections::HashMap;

use super::param::{ParamId, ParamSet};
use super::tensor::{gemm, sigmoid, Layout, Tensor};
use super::NumericsError;

/// Handle to a node in a [`Graph`].
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
    Param(ParamId),
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    AddRowBias(Var, Var),
    Tanh(Var),
    Sigmoid(Var),
    Elu(Var),
    Exp(Var),
    Softmax(Var),
    Transpose(Var),
    Reshape(Var),
    SliceCols(Var, usize, usize),
    SliceRows(Var, usize, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    Sum(Var),
    Mean(Var),
    MaskMul(Var, Tensor),
    /// Saved: normalized input and per-row inverse std.
    LayerNorm { x: Var, gain: Var, bias: Var, xhat: Tensor, inv_std: Vec<f64> },
    /// Saved: gate activations `[i, f, g, o, tanh(c)]` per row.
    LstmGates { gates: Var, c_prev: Var, saved: Vec<f64> },
    Pinball { pred: Var, target: Tensor, levels: Vec<f64> },
}

#[derive(Debug)]
struct Node {
    op: Op,
    value: Option<Tensor>,
    requires_grad: bool,
}

/// Computation graph, optionally reading parameter values from a borrowed [`ParamSet`].
pub struct Graph<'p> {
    nodes: Vec<Node>,
    params: Option<&'p ParamSet>,
    param_nodes: HashMap<ParamId, Var>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), params: None, param_nodes: HashMap::new() }
    }

    pub fn with_params(params: &'p ParamSet) -> Self {
        Self { nodes: Vec::with_capacity(1024), params: Some(params), param_nodes: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => &self.params.expect("param node without a parameter set").get(*id).value,
            _ => unreachable!("node without value"),
        }
    }

    fn push(&mut self, op: Op, value: Tensor, requires_grad: bool) -> Var {
        self.nodes.push(Node { op, value: Some(value), requires_grad });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Constant input; no gradient is propagated into it.
    pub fn input(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, false)
    }

    /// Free leaf that receives a gradient.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf, t, true)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        if let Some(&v) = self.param_nodes.get(&id) {
            return v;
        }
        assert!(self.params.is_some(), "graph was built without a parameter set");
        self.nodes.push(Node { op: Op::Param(id), value: None, requires_grad: true });
        let v = Var(self.nodes.len() - 1);
        self.param_nodes.insert(id, v);
        v
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::MatMul(a, b), out, rg))
    }

    fn same_shape(&self, a: Var, b: Var, what: &str) -> Result<(), NumericsError> {
        let (sa, sb) = (self.value(a).shape(), self.value(b).shape());
        if sa != sb {
            return Err(NumericsError::Shape(format!("{what}: shapes {sa:?} and {sb:?} differ")));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape(a, b, "add")?;
        let out = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Add(a, b), out, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape(a, b, "sub")?;
        let out = self.value(a).sub(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Sub(a, b), out, rg))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, NumericsError> {
        self.same_shape(a, b, "mul")?;
        let out = self.value(a).mul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(Op::Mul(a, b), out, rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(Op::Scale(a, s), out, rg)
    }

    pub fn add_scalar(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).map(|v| v + s);
        let rg = self.rg(a);
        self.push(Op::AddScalar(a), out, rg)
    }

    /// `x[m x n] + b[n]`, the bias repeated for every row.
    pub fn add_row_bias(&mut self, x: Var, b: Var) -> Result<Var, NumericsError> {
        let (m, n) = self.value(x).dims2()?;
        if self.value(b).len() != n {
            return Err(NumericsError::Shape(format!(
                "bias of shape {:?} does not match {} columns",
                self.value(b).shape(),
                n
            )));
        }
        let bias = self.value(b).data();
        let mut out = self.value(x).data().to_vec();
        for r in 0..m {
            for (o, bv) in out[r * n..(r + 1) * n].iter_mut().zip(bias) {
                *o += bv;
            }
        }
        let rg = self.rg(x) || self.rg(b);
        Ok(self.push(Op::AddRowBias(x, b), Tensor::new(&[m, n], out)?, rg))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.value(a).tanh();
        let rg = self.rg(a);
        self.push(Op::Tanh(a), out, rg)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.value(a).sigmoid();
        let rg = self.rg(a);
        self.push(Op::Sigmoid(a), out, rg)
    }

    pub fn elu(&mut self, a: Var) -> Var {
        let out = self.value(a).elu();
        let rg = self.rg(a);
        self.push(Op::Elu(a), out, rg)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.value(a).exp();
        let rg = self.rg(a);
        self.push(Op::Exp(a), out, rg)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let out = self.value(a).softmax_last_axis();
        let rg = self.rg(a);
        self.push(Op::Softmax(a), out, rg)
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var, NumericsError> {
        let out = self.value(a).transpose()?;
        let rg = self.rg(a);
        Ok(self.push(Op::Transpose(a), out, rg))
    }

    pub fn reshape(&mut self, a: Var, shape: &[usize]) -> Result<Var, NumericsError> {
        let out = self.value(a).reshape(shape)?;
        let rg = self.rg(a);
        Ok(self.push(Op::Reshape(a), out, rg))
    }

    /// Columns `start..end` of a matrix.
    pub fn slice_cols(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let (m, n) = self.value(a).dims2()?;
        if start >= end || end > n {
            return Err(NumericsError::Shape(format!("column slice {start}..{end} out of 0..{n}")));
        }
        let src = self.value(a).data();
        let w = end - start;
        let mut out = Vec::with_capacity(m * w);
        for r in 0..m {
            out.extend_from_slice(&src[r * n + start..r * n + end]);
        }
        let rg = self.rg(a);
        Ok(self.push(Op::SliceCols(a, start, end), Tensor::new(&[m, w], out)?, rg))
    }

    /// Rows `start..end` of a matrix.
    pub fn slice_rows(&mut self, a: Var, start: usize, end: usize) -> Result<Var, NumericsError> {
        let (m, n) = self.value(a).dims2()?;
        if start >= end || end > m {
            return Err(NumericsError::Shape(format!("row slice {start}..{end} out of 0..{m}")));
        }
        let out = self.value(a).data()[start * n..end * n].to_vec();
        let rg = self.rg(a);
        Ok(self.push(Op::SliceRows(a, start, end), Tensor::new(&[end - start, n], out)?, rg))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let mut rows = None;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (m, n) = self.value(p).dims2()?;
            if *rows.get_or_insert(m) != m {
                return Err(NumericsError::Shape("concat_cols: row counts differ".into()));
            }
            widths.push(n);
        }
        let m = rows.ok_or_else(|| NumericsError::Shape("concat of nothing".into()))?;
        let total: usize = widths.iter().sum();
        let mut out = vec![0.0; m * total];
        let mut offset = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let src = self.value(p).data();
            for r in 0..m {
                out[r * total + offset..r * total + offset + w].copy_from_slice(&src[r * w..(r + 1) * w]);
            }
            offset += w;
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::ConcatCols(parts.to_vec()), Tensor::new(&[m, total], out)?, rg))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, NumericsError> {
        let mut cols = None;
        let mut total_rows = 0;
        for &p in parts {
            let (m, n) = self.value(p).dims2()?;
            if *cols.get_or_insert(n) != n {
                return Err(NumericsError::Shape("concat_rows: column counts differ".into()));
            }
            total_rows += m;
        }
        let n = cols.ok_or_else(|| NumericsError::Shape("concat of nothing".into()))?;
        let mut out = Vec::with_capacity(total_rows * n);
        for &p in parts {
            out.extend_from_slice(self.value(p).data());
        }
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(Op::ConcatRows(parts.to_vec()), Tensor::new(&[total_rows, n], out)?, rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let out = Tensor::scalar(self.value(a).sum());
        let rg = self.rg(a);
        self.push(Op::Sum(a), out, rg)
    }

    pub fn mean(&mut self, a: Var) -> Var {
        let t = self.value(a);
        let out = Tensor::scalar(t.sum() / t.len() as f64);
        let rg = self.rg(a);
        self.push(Op::Mean(a), out, rg)
    }

    /// Elementwise product with a constant mask.
    pub fn mask_mul(&mut self, a: Var, mask: Tensor) -> Result<Var, NumericsError> {
        if mask.shape() != self.value(a).shape() {
            return Err(NumericsError::Shape(format!(
                "mask shape {:?} differs from {:?}",
                mask.shape(),
                self.value(a).shape()
            )));
        }
        let out = self.value(a).mul(&mask)?;
        let rg = self.rg(a);
        Ok(self.push(Op::MaskMul(a, mask), out, rg))
    }

    /// Normalizes every last-axis slice, then applies `gain` and `bias` (both of extent `d`).
    pub fn layer_norm(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var, NumericsError> {
        let xt = self.value(x);
        let d = xt.last_dim();
        if self.value(gain).len() != d || self.value(bias).len() != d {
            return Err(NumericsError::Shape(format!("layer norm affine extents must equal {d}")));
        }
        let rows = xt.len() / d;
        let mut xhat = vec![0.0; xt.len()];
        let mut inv_std = Vec::with_capacity(rows);
        for r in 0..rows {
            let slice = &xt.data()[r * d..(r + 1) * d];
            let mean = slice.iter().sum::<f64>() / d as f64;
            let var = slice.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for (o, v) in xhat[r * d..(r + 1) * d].iter_mut().zip(slice) {
                *o = (v - mean) * is;
            }
        }
        let (g, b) = (self.value(gain).data(), self.value(bias).data());
        let out: Vec<f64> = xhat.iter().enumerate().map(|(i, &v)| v * g[i % d] + b[i % d]).collect();
        let shape = xt.shape().to_vec();
        let xhat = Tensor::new(&shape, xhat)?;
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(Op::LayerNorm { x, gain, bias, xhat, inv_std }, Tensor::new(&shape, out)?, rg))
    }

    /// Fused LSTM cell nonlinearity. `gates` holds pre-activations `[i | f | g | o]`
    /// of shape `m x 4u`, `c_prev` is `m x u`; the result is `[h | c]` of shape `m x 2u`.
    pub fn lstm_gates(&mut self, gates: Var, c_prev: Var) -> Result<Var, NumericsError> {
        let (m, four_u) = self.value(gates).dims2()?;
        let (mc, u) = self.value(c_prev).dims2()?;
        if mc != m || four_u != 4 * u {
            return Err(NumericsError::Shape(format!(
                "lstm gates {:?} incompatible with cell state {:?}",
                self.value(gates).shape(),
                self.value(c_prev).shape()
            )));
        }
        let a = self.value(gates).data();
        let c0 = self.value(c_prev).data();
        let mut saved = vec![0.0; m * 5 * u];
        let mut out = vec![0.0; m * 2 * u];
        for r in 0..m {
            let a = &a[r * 4 * u..(r + 1) * 4 * u];
            let s = &mut saved[r * 5 * u..(r + 1) * 5 * u];
            for j in 0..u {
                let i = sigmoid(a[j]);
                let f = sigmoid(a[u + j]);
                let g = a[2 * u + j].tanh();
                let o = sigmoid(a[3 * u + j]);
                let c = f * c0[r * u + j] + i * g;
                let tc = c.tanh();
                s[j] = i;
                s[u + j] = f;
                s[2 * u + j] = g;
                s[3 * u + j] = o;
                s[4 * u + j] = tc;
                out[r * 2 * u + j] = o * tc;
                out[r * 2 * u + u + j] = c;
            }
        }
        let rg = self.rg(gates) || self.rg(c_prev);
        Ok(self.push(Op::LstmGates { gates, c_prev, saved }, Tensor::new(&[m, 2 * u], out)?, rg))
    }

    /// Mean pinball loss. The last axis of `pred` indexes `levels`; `target`
    /// has the shape of `pred` without that axis.
    pub fn pinball(&mut self, pred: Var, target: &Tensor, levels: &[f64]) -> Result<Var, NumericsError> {
        let p = self.value(pred);
        let q = levels.len();
        if q == 0 || p.last_dim() != q || p.len() != target.len() * q {
            return Err(NumericsError::Shape(format!(
                "prediction {:?} does not match target {:?} with {q} levels",
                p.shape(),
                target.shape()
            )));
        }
        let mut total = 0.0;
        for (i, &y) in target.data().iter().enumerate() {
            for (k, &level) in levels.iter().enumerate() {
                total += pinball_term(y, p.data()[i * q + k], level);
            }
        }
        let out = Tensor::scalar(total / p.len() as f64);
        let rg = self.rg(pred);
        Ok(self.push(Op::Pinball { pred, target: target.clone(), levels: levels.to_vec() }, out, rg))
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients, NumericsError> {
        let lt = self.value(loss);
        if !lt.is_scalar() {
            return Err(NumericsError::Contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape()
            )));
        }
        if !lt.all_finite() {
            return Err(NumericsError::NonFinite("loss".into()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(lt.shape()));

        for idx in (0..=loss.0).rev() {
            let Some(dy) = grads[idx].take() else { continue };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &dy, &mut grads)?;
            grads[idx] = Some(dy);
        }

        let mut param_grads = Vec::new();
        if let Some(ps) = self.params {
            param_grads = ps.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
            for (&id, &v) in &self.param_nodes {
                if let Some(g) = &grads[v.0] {
                    param_grads[id.index()].add_assign(g);
                }
            }
        }
        Ok(Gradients { nodes: grads, params: param_grads })
    }

    fn propagate(&self, idx: usize, dy: &Tensor, grads: &mut [Option<Tensor>]) -> Result<(), NumericsError> {
        let node = &self.nodes[idx];
        let y = node.value.as_ref();
        let mut acc = |v: Var, t: Tensor| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut grads[v.0] {
                Some(g) => g.add_assign(&t),
                slot @ None => *slot = Some(t),
            }
        };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (at, bt) = (self.value(*a), self.value(*b));
                let (m, k) = at.dims2()?;
                let n = bt.last_dim();
                if self.rg(*a) {
                    let mut da = vec![0.0; m * k];
                    gemm(m, n, k, dy.data(), Layout::Normal, bt.data(), Layout::Transposed, &mut da, 0.0);
                    acc(*a, Tensor::new(&[m, k], da)?);
                }
                if self.rg(*b) {
                    let mut db = vec![0.0; k * n];
                    gemm(k, m, n, at.data(), Layout::Transposed, dy.data(), Layout::Normal, &mut db, 0.0);
                    acc(*b, Tensor::new(&[k, n], db)?);
                }
            }
            Op::Add(a, b) => {
                acc(*a, dy.clone());
                acc(*b, dy.clone());
            }
            Op::Sub(a, b) => {
                acc(*a, dy.clone());
                acc(*b, dy.scale(-1.0));
            }
            Op::Mul(a, b) => {
                if self.rg(*a) {
                    acc(*a, dy.mul(self.value(*b))?);
                }
                if self.rg(*b) {
                    acc(*b, dy.mul(self.value(*a))?);
                }
            }
            Op::Scale(a, s) => acc(*a, dy.scale(*s)),
            Op::AddScalar(a) => acc(*a, dy.clone()),
            Op::AddRowBias(x, b) => {
                acc(*x, dy.clone());
                if self.rg(*b) {
                    let n = dy.last_dim();
                    let mut db = vec![0.0; n];
                    for row in dy.data().chunks(n) {
                        for (d, v) in db.iter_mut().zip(row) {
                            *d += v;
                        }
                    }
                    acc(*b, Tensor::new(self.value(*b).shape(), db)?);
                }
            }
            Op::Tanh(a) => {
                let y = y.expect("value");
                acc(*a, zip(dy, y, |g, t| g * (1.0 - t * t)));
            }
            Op::Sigmoid(a) => {
                let y = y.expect("value");
                acc(*a, zip(dy, y, |g, s| g * s * (1.0 - s)));
            }
            Op::Elu(a) => {
                let x = self.value(*a);
                acc(*a, zip(dy, x, |g, x| if x > 0.0 { g } else { g * x.exp() }));
            }
            Op::Exp(a) => {
                let y = y.expect("value");
                acc(*a, zip(dy, y, |g, e| g * e));
            }
            Op::Softmax(a) => {
                let y = y.expect("value");
                let n = y.last_dim();
                let mut dx = vec![0.0; y.len()];
                for ((dxr, yr), gr) in dx.chunks_mut(n).zip(y.data().chunks(n)).zip(dy.data().chunks(n)) {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((d, &yv), &gv) in dxr.iter_mut().zip(yr).zip(gr) {
                        *d = yv * (gv - dot);
                    }
                }
                acc(*a, Tensor::new(y.shape(), dx)?);
            }
            Op::Transpose(a) => acc(*a, dy.transpose()?),
            Op::Reshape(a) => acc(*a, dy.reshape(self.value(*a).shape())?),
            Op::SliceCols(a, start, end) => {
                let (m, n) = self.value(*a).dims2()?;
                let w = end - start;
                let mut dx = vec![0.0; m * n];
                for r in 0..m {
                    dx[r * n + start..r * n + end].copy_from_slice(&dy.data()[r * w..(r + 1) * w]);
                }
                acc(*a, Tensor::new(&[m, n], dx)?);
            }
            Op::SliceRows(a, start, end) => {
                let (m, n) = self.value(*a).dims2()?;
                let mut dx = vec![0.0; m * n];
                dx[start * n..end * n].copy_from_slice(dy.data());
                acc(*a, Tensor::new(&[m, n], dx)?);
            }
            Op::ConcatCols(parts) => {
                let total = dy.last_dim();
                let m = dy.len() / total;
                let mut offset = 0;
                for &p in parts {
                    let w = self.value(p).last_dim();
                    if self.rg(p) {
                        let mut dp = Vec::with_capacity(m * w);
                        for r in 0..m {
                            dp.extend_from_slice(&dy.data()[r * total + offset..r * total + offset + w]);
                        }
                        acc(p, Tensor::new(&[m, w], dp)?);
                    }
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    if self.rg(p) {
                        acc(p, Tensor::new(self.value(p).shape(), dy.data()[offset..offset + len].to_vec())?);
                    }
                    offset += len;
                }
            }
            Op::Sum(a) => acc(*a, Tensor::full(self.value(*a).shape(), dy.item())),
            Op::Mean(a) => {
                let t = self.value(*a);
                acc(*a, Tensor::full(t.shape(), dy.item() / t.len() as f64));
            }
            Op::MaskMul(a, mask) => acc(*a, dy.mul(mask)?),
            Op::LayerNorm { x, gain, bias, xhat, inv_std } => {
                let d = xhat.last_dim();
                let g = self.value(*gain).data();
                if self.rg(*gain) || self.rg(*bias) {
                    let mut dg = vec![0.0; d];
                    let mut db = vec![0.0; d];
                    for (i, (&gy, &xh)) in dy.data().iter().zip(xhat.data()).enumerate() {
                        dg[i % d] += gy * xh;
                        db[i % d] += gy;
                    }
                    acc(*gain, Tensor::new(self.value(*gain).shape(), dg)?);
                    acc(*bias, Tensor::new(self.value(*bias).shape(), db)?);
                }
                if self.rg(*x) {
                    let mut dx = vec![0.0; xhat.len()];
                    let df = d as f64;
                    for (r, &is) in inv_std.iter().enumerate() {
                        let xh = &xhat.data()[r * d..(r + 1) * d];
                        let gy = &dy.data()[r * d..(r + 1) * d];
                        let dxh: Vec<f64> = gy.iter().zip(g).map(|(a, b)| a * b).collect();
                        let s1: f64 = dxh.iter().sum();
                        let s2: f64 = dxh.iter().zip(xh).map(|(a, b)| a * b).sum();
                        for j in 0..d {
                            dx[r * d + j] = is / df * (df * dxh[j] - s1 - xh[j] * s2);
                        }
                    }
                    acc(*x, Tensor::new(xhat.shape(), dx)?);
                }
            }
            Op::LstmGates { gates, c_prev, saved } => {
                let (m, two_u) = dy.dims2()?;
                let u = two_u / 2;
                let c0 = self.value(*c_prev).data();
                let mut da = vec![0.0; m * 4 * u];
                let mut dc0 = vec![0.0; m * u];
                for r in 0..m {
                    let s = &saved[r * 5 * u..(r + 1) * 5 * u];
                    let g_out = &dy.data()[r * 2 * u..(r + 1) * 2 * u];
                    for j in 0..u {
                        let (i, f, g, o, tc) = (s[j], s[u + j], s[2 * u + j], s[3 * u + j], s[4 * u + j]);
                        let dh = g_out[j];
                        let dc = g_out[u + j] + dh * o * (1.0 - tc * tc);
                        let row = &mut da[r * 4 * u..(r + 1) * 4 * u];
                        row[j] = dc * g * i * (1.0 - i);
                        row[u + j] = dc * c0[r * u + j] * f * (1.0 - f);
                        row[2 * u + j] = dc * i * (1.0 - g * g);
                        row[3 * u + j] = dh * tc * o * (1.0 - o);
                        dc0[r * u + j] = dc * f;
                    }
                }
                acc(*gates, Tensor::new(&[m, 4 * u], da)?);
                acc(*c_prev, Tensor::new(&[m, u], dc0)?);
            }
            Op::Pinball { pred, target, levels } => {
                let p = self.value(*pred);
                let q = levels.len();
                let scale = dy.item() / p.len() as f64;
                let mut dp = vec![0.0; p.len()];
                for (i, &y) in target.data().iter().enumerate() {
                    for (k, &level) in levels.iter().enumerate() {
                        dp[i * q + k] = scale * pinball_slope(y, p.data()[i * q + k], level);
                    }
                }
                acc(*pred, Tensor::new(p.shape(), dp)?);
            }
        }
        Ok(())
    }
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::new(a.shape(), data).expect("same shape")
}

/// `max(q * e, (q - 1) * e)` with `e = actual - predicted`.
pub fn pinball_term(actual: f64, predicted: f64, level: f64) -> f64 {
    let e = actual - predicted;
    (level * e).max((level - 1.0) * e)
}

/// Derivative of [`pinball_term`] with respect to the prediction; the kink
/// takes the midpoint of the subdifferential.
fn pinball_slope(actual: f64, predicted: f64, level: f64) -> f64 {
    let e = actual - predicted;
    if e > 0.0 {
        -level
    } else if e < 0.0 {
        1.0 - level
    } else {
        0.5 - level
    }
}

/// Result of [`Graph::backward`].
#[derive(Debug)]
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<Tensor>,
}

impl Gradients {
    /// Gradient of the loss with respect to a node, if the node was reached.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    /// One tensor per parameter, zero for parameters the loss does not reach.
    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn into_params(self) -> Vec<Tensor> {
        self.params
    }
}
