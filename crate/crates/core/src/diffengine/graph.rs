//! Tape of tensor operations with exact reverse-mode gradients.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and `backward` is a single reverse sweep. Every op has an
//! explicit shape rule; there is no implicit broadcasting.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a node of a [`Graph`].
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
    /// `(G×J) · (B×J×T) → (B×G×T)`, one product per batch element.
    MixChannels(Var, Var),
    AddBias(Var, Var),
    Conv1dTime { x: Var, w: Var, stride: usize },
    AvgPool1d { x: Var, width: usize },
    Elu(Var),
    Flatten(Var),
    Transpose(Var),
    GatherRows { x: Var, rows: Vec<usize> },
    Add(Var, Var),
    Sub(Var, Var),
    Scale(Var, f64),
    Mean(Var),
    FrobeniusSq(Var),
    Mse(Var, Var),
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

impl Op {
    fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::MatMul(..) => "matmul",
            Op::MixChannels(..) => "matmul",
            Op::AddBias(..) => "add_bias",
            Op::Conv1dTime { .. } => "conv1d_time",
            Op::AvgPool1d { .. } => "avg_pool1d",
            Op::Elu(_) => "elu",
            Op::Flatten(_) => "flatten",
            Op::Transpose(_) => "transpose",
            Op::GatherRows { .. } => "gather_rows",
            Op::Add(..) => "add",
            Op::Sub(..) => "subtract",
            Op::Scale(..) => "scale",
            Op::Mean(_) => "mean",
            Op::FrobeniusSq(_) => "frobenius_sq",
            Op::Mse(..) => "mse",
            Op::SoftmaxCrossEntropy { .. } => "softmax_cross_entropy",
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Recorded computation.
#[derive(Debug, Default, Clone)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that requires them.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// `None` for nodes that do not require gradients.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }

    pub fn take(&mut self, v: Var) -> Option<Tensor> {
        self.grads.get_mut(v.0).and_then(Option::take)
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

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Trainable leaf.
    pub fn param(&mut self, t: Tensor) -> Result<Var> {
        self.leaf(t, true)
    }

    /// Leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Result<Var> {
        self.leaf(t, false)
    }

    pub fn leaf(&mut self, t: Tensor, requires_grad: bool) -> Result<Var> {
        self.push(t, Op::Leaf, requires_grad)
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::Numeric {
                node: format!("{}#{}", op.name(), self.nodes.len()),
            });
        }
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// `(M×K)·(K×N)`, or `(G×J)·(B×J×T)` applied per batch element.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (sa, sb) = (self.shape(a).to_vec(), self.shape(b).to_vec());
        match (sa.as_slice(), sb.as_slice()) {
            (&[m, k], &[k2, n]) if k == k2 => {
                let out = matmul_nn(self.value(a).data(), self.value(b).data(), m, k, n);
                let rg = self.rg(&[a, b]);
                self.push(Tensor::new(vec![m, n], out)?, Op::MatMul(a, b), rg)
            }
            (&[g, j], &[batch, j2, t]) if j == j2 => {
                let (w, x) = (self.value(a).data(), self.value(b).data());
                let mut out = vec![0.0; batch * g * t];
                for bi in 0..batch {
                    let xb = &x[bi * j * t..(bi + 1) * j * t];
                    let ob = &mut out[bi * g * t..(bi + 1) * g * t];
                    for gi in 0..g {
                        let orow = &mut ob[gi * t..(gi + 1) * t];
                        for ji in 0..j {
                            let coef = w[gi * j + ji];
                            axpy(coef, &xb[ji * t..(ji + 1) * t], orow);
                        }
                    }
                }
                let rg = self.rg(&[a, b]);
                self.push(Tensor::new(vec![batch, g, t], out)?, Op::MixChannels(a, b), rg)
            }
            _ => Err(Error::shape("matmul", format!("{sa:?} x {sb:?}"))),
        }
    }

    /// Adds `bias` along axis 1 of a rank-2 `(B×C)` or rank-3 `(B×G×T)` tensor.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Result<Var> {
        let (sx, sb) = (self.shape(x).to_vec(), self.shape(bias).to_vec());
        let (rows, ch, inner) = match (sx.as_slice(), sb.as_slice()) {
            (&[r, c], &[c2]) if c == c2 => (r, c, 1),
            (&[r, g, t], &[g2]) if g == g2 => (r, g, t),
            _ => return Err(Error::shape("add_bias", format!("{sx:?} + {sb:?}"))),
        };
        let bv = self.value(bias).data();
        let mut out = self.value(x).data().to_vec();
        for r in 0..rows {
            for c in 0..ch {
                let base = (r * ch + c) * inner;
                out[base..base + inner].iter_mut().for_each(|v| *v += bv[c]);
            }
        }
        let rg = self.rg(&[x, bias]);
        self.push(Tensor::new(sx, out)?, Op::AddBias(x, bias), rg)
    }

    /// Temporal convolution applied identically to every input channel, valid
    /// padding: `(B×C×T) ⊛ (F×K) → (B×(F·C)×T')` with `T' = (T−K)/stride + 1`.
    /// Output row `f·C + c` is filter `f` over channel `c`.
    pub fn conv1d_time(&mut self, x: Var, w: Var, stride: usize) -> Result<Var> {
        let (sx, sw) = (self.shape(x).to_vec(), self.shape(w).to_vec());
        let (&[b, c, t], &[f, k]) = (sx.as_slice(), sw.as_slice()) else {
            return Err(Error::shape("conv1d_time", format!("{sx:?} with kernel {sw:?}")));
        };
        if stride == 0 || k > t {
            return Err(Error::shape(
                "conv1d_time",
                format!("kernel {k} stride {stride} over length {t}"),
            ));
        }
        let t_out = (t - k) / stride + 1;
        let (xv, wv) = (self.value(x).data(), self.value(w).data());
        let mut out = vec![0.0; b * f * c * t_out];
        for bi in 0..b {
            for ci in 0..c {
                let xrow = &xv[(bi * c + ci) * t..(bi * c + ci + 1) * t];
                for fi in 0..f {
                    let kern = &wv[fi * k..(fi + 1) * k];
                    let obase = ((bi * f + fi) * c + ci) * t_out;
                    let orow = &mut out[obase..obase + t_out];
                    if stride == 1 {
                        conv_row(kern, xrow, orow);
                    } else {
                        for (ti, o) in orow.iter_mut().enumerate() {
                            *o = dot(kern, &xrow[ti * stride..ti * stride + k]);
                        }
                    }
                }
            }
        }
        let rg = self.rg(&[x, w]);
        self.push(
            Tensor::new(vec![b, f * c, t_out], out)?,
            Op::Conv1dTime { x, w, stride },
            rg,
        )
    }

    /// Non-overlapping mean over windows of `width` on the last axis of a
    /// rank-3 tensor; a ragged tail is dropped.
    pub fn avg_pool1d(&mut self, x: Var, width: usize) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let &[b, g, t] = sx.as_slice() else {
            return Err(Error::shape("avg_pool1d", format!("expects rank 3, got {sx:?}")));
        };
        if width == 0 || width > t {
            return Err(Error::shape("avg_pool1d", format!("width {width} over length {t}")));
        }
        let t_out = t / width;
        let xv = self.value(x).data();
        let inv = 1.0 / width as f64;
        let mut out = Vec::with_capacity(b * g * t_out);
        for row in xv.chunks_exact(t) {
            for win in row[..t_out * width].chunks_exact(width) {
                out.push(win.iter().sum::<f64>() * inv);
            }
        }
        let rg = self.rg(&[x]);
        self.push(Tensor::new(vec![b, g, t_out], out)?, Op::AvgPool1d { x, width }, rg)
    }

    pub fn elu(&mut self, x: Var) -> Result<Var> {
        let out: Vec<f64> = self
            .value(x)
            .data()
            .iter()
            .map(|&v| if v > 0.0 { v } else { v.exp_m1() })
            .collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(Tensor::new(shape, out)?, Op::Elu(x), rg)
    }

    /// `(B×…) → (B×rest)`.
    pub fn flatten(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        if sx.len() < 2 {
            return Err(Error::shape("flatten", format!("needs rank ≥ 2, got {sx:?}")));
        }
        let rest = sx[1..].iter().product();
        let t = self.value(x).clone().reshaped(vec![sx[0], rest]);
        let rg = self.rg(&[x]);
        self.push(t, Op::Flatten(x), rg)
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let &[r, c] = sx.as_slice() else {
            return Err(Error::shape("transpose", format!("needs rank 2, got {sx:?}")));
        };
        let xv = self.value(x).data();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = xv[i * c + j];
            }
        }
        let rg = self.rg(&[x]);
        self.push(Tensor::new(vec![c, r], out)?, Op::Transpose(x), rg)
    }

    /// Selects rows of a rank-2 tensor.
    pub fn gather_rows(&mut self, x: Var, rows: &[usize]) -> Result<Var> {
        let sx = self.shape(x).to_vec();
        let &[r, c] = sx.as_slice() else {
            return Err(Error::shape("gather_rows", format!("needs rank 2, got {sx:?}")));
        };
        if rows.is_empty() || rows.iter().any(|&i| i >= r) {
            return Err(Error::shape("gather_rows", format!("row indices {rows:?} for {r} rows")));
        }
        let xv = self.value(x);
        let out: Vec<f64> = rows.iter().flat_map(|&i| xv.row(i).iter().copied()).collect();
        let rg = self.rg(&[x]);
        self.push(
            Tensor::new(vec![rows.len(), c], out)?,
            Op::GatherRows {
                x,
                rows: rows.to_vec(),
            },
            rg,
        )
    }

    fn same_shape(&self, op: &'static str, a: Var, b: Var) -> Result<()> {
        if self.shape(a) != self.shape(b) {
            return Err(Error::shape(
                op,
                format!("{:?} vs {:?}", self.shape(a), self.shape(b)),
            ));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("add", a, b)?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x + y);
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        self.push(Tensor::new(shape, out)?, Op::Add(a, b), rg)
    }

    pub fn subtract(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("subtract", a, b)?;
        let out = zip_map(self.value(a).data(), self.value(b).data(), |x, y| x - y);
        let shape = self.shape(a).to_vec();
        let rg = self.rg(&[a, b]);
        self.push(Tensor::new(shape, out)?, Op::Sub(a, b), rg)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let out = self.value(x).data().iter().map(|v| v * factor).collect();
        let shape = self.shape(x).to_vec();
        let rg = self.rg(&[x]);
        self.push(Tensor::new(shape, out)?, Op::Scale(x, factor), rg)
    }

    /// Mean over all elements.
    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x).data();
        let m = xv.iter().sum::<f64>() / xv.len() as f64;
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(m), Op::Mean(x), rg)
    }

    /// Sum of squared elements.
    pub fn frobenius_sq(&mut self, x: Var) -> Result<Var> {
        let s = self.value(x).data().iter().map(|v| v * v).sum();
        let rg = self.rg(&[x]);
        self.push(Tensor::scalar(s), Op::FrobeniusSq(x), rg)
    }

    /// Mean squared elementwise difference.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        self.same_shape("mse", a, b)?;
        let (av, bv) = (self.value(a).data(), self.value(b).data());
        let s: f64 = av.iter().zip(bv).map(|(x, y)| (x - y) * (x - y)).sum();
        let v = s / av.len() as f64;
        let rg = self.rg(&[a, b]);
        self.push(Tensor::scalar(v), Op::Mse(a, b), rg)
    }

    /// Batch mean of `−log softmax(logits)[label]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let sl = self.shape(logits).to_vec();
        let &[b, c] = sl.as_slice() else {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("logits must be rank 2, got {sl:?}"),
            ));
        };
        if labels.len() != b {
            return Err(Error::shape(
                "softmax_cross_entropy",
                format!("{} labels for batch of {b}", labels.len()),
            ));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidInput(format!("label {bad} outside [0, {c})")));
        }
        let lv = self.value(logits);
        let mut probs = Vec::with_capacity(b * c);
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = lv.row(i);
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + row.iter().map(|v| (v - mx).exp()).sum::<f64>().ln();
            total += lse - row[y];
            probs.extend(row.iter().map(|v| (v - lse).exp()));
        }
        let rg = self.rg(&[logits]);
        self.push(
            Tensor::scalar(total / b as f64),
            Op::SoftmaxCrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            rg,
        )
    }

    /// Reverse sweep from a scalar node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if !self.nodes[loss.0].value.is_scalar() {
            return Err(Error::InvalidInput(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; self.nodes.len()];
        if self.nodes[loss.0].requires_grad {
            grads[loss.0] = Some(vec![1.0]);
        }
        for i in (0..=loss.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        let grads = grads
            .into_iter()
            .zip(&self.nodes)
            .map(|(g, n)| match g {
                Some(d) if n.requires_grad => Some(Tensor::new(n.value.shape().to_vec(), d).expect("gradient shape")),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Vec<f64>>], v: Var, f: impl FnOnce(&mut [f64])) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        let slot = grads[v.0].get_or_insert_with(|| vec![0.0; self.nodes[v.0].value.len()]);
        f(slot);
    }

    fn propagate(&self, i: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[i];
        match &node.op {
            Op::Leaf => {}
            &Op::MatMul(a, b) => {
                let (sa, sb) = (self.shape(a), self.shape(b));
                let (m, k, n) = (sa[0], sa[1], sb[1]);
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                self.accumulate(grads, a, |da| {
                    // dA = G · Bᵀ
                    for r in 0..m {
                        for c in 0..k {
                            da[r * k + c] += dot(&g[r * n..(r + 1) * n], &bv[c * n..(c + 1) * n]);
                        }
                    }
                });
                self.accumulate(grads, b, |db| {
                    // dB = Aᵀ · G
                    for r in 0..m {
                        for c in 0..k {
                            axpy(av[r * k + c], &g[r * n..(r + 1) * n], &mut db[c * n..(c + 1) * n]);
                        }
                    }
                });
            }
            &Op::MixChannels(w, x) => {
                let sx = self.shape(x);
                let (batch, j, t) = (sx[0], sx[1], sx[2]);
                let gdim = self.shape(w)[0];
                let (wv, xv) = (self.value(w).data(), self.value(x).data());
                self.accumulate(grads, w, |dw| {
                    for bi in 0..batch {
                        for gi in 0..gdim {
                            let grow = &g[(bi * gdim + gi) * t..(bi * gdim + gi + 1) * t];
                            for ji in 0..j {
                                dw[gi * j + ji] += dot(grow, &xv[(bi * j + ji) * t..(bi * j + ji + 1) * t]);
                            }
                        }
                    }
                });
                self.accumulate(grads, x, |dx| {
                    for bi in 0..batch {
                        for gi in 0..gdim {
                            let grow = &g[(bi * gdim + gi) * t..(bi * gdim + gi + 1) * t];
                            for ji in 0..j {
                                axpy(wv[gi * j + ji], grow, &mut dx[(bi * j + ji) * t..(bi * j + ji + 1) * t]);
                            }
                        }
                    }
                });
            }
            &Op::AddBias(x, bias) => {
                let sx = self.shape(x);
                let (ch, inner) = (sx[1], sx.get(2).copied().unwrap_or(1));
                self.accumulate(grads, x, |dx| add_into(dx, g));
                self.accumulate(grads, bias, |db| {
                    for (idx, chunk) in g.chunks_exact(inner).enumerate() {
                        db[idx % ch] += chunk.iter().sum::<f64>();
                    }
                });
            }
            &Op::Conv1dTime { x, w, stride } => {
                let (sx, sw) = (self.shape(x), self.shape(w));
                let (b, c, t) = (sx[0], sx[1], sx[2]);
                let (f, k) = (sw[0], sw[1]);
                let t_out = node.value.shape()[2];
                let (xv, wv) = (self.value(x).data(), self.value(w).data());
                self.accumulate(grads, w, |dw| {
                    for bi in 0..b {
                        for ci in 0..c {
                            let xrow = &xv[(bi * c + ci) * t..(bi * c + ci + 1) * t];
                            for fi in 0..f {
                                let gbase = ((bi * f + fi) * c + ci) * t_out;
                                let dk = &mut dw[fi * k..(fi + 1) * k];
                                let grow = &g[gbase..gbase + t_out];
                                if stride == 1 {
                                    conv_row_grad(grow, xrow, dk);
                                } else {
                                    for (ti, &gv) in grow.iter().enumerate() {
                                        axpy(gv, &xrow[ti * stride..ti * stride + k], dk);
                                    }
                                }
                            }
                        }
                    }
                });
                self.accumulate(grads, x, |dx| {
                    for bi in 0..b {
                        for ci in 0..c {
                            let dxrow = &mut dx[(bi * c + ci) * t..(bi * c + ci + 1) * t];
                            for fi in 0..f {
                                let gbase = ((bi * f + fi) * c + ci) * t_out;
                                let kern = &wv[fi * k..(fi + 1) * k];
                                for (ti, &gv) in g[gbase..gbase + t_out].iter().enumerate() {
                                    axpy(gv, kern, &mut dxrow[ti * stride..ti * stride + k]);
                                }
                            }
                        }
                    }
                });
            }
            &Op::AvgPool1d { x, width } => {
                let t = self.shape(x)[2];
                let t_out = node.value.shape()[2];
                let inv = 1.0 / width as f64;
                self.accumulate(grads, x, |dx| {
                    for (row, grow) in dx.chunks_exact_mut(t).zip(g.chunks_exact(t_out)) {
                        for (win, &gv) in row[..t_out * width].chunks_exact_mut(width).zip(grow) {
                            win.iter_mut().for_each(|d| *d += gv * inv);
                        }
                    }
                });
            }
            &Op::Elu(x) => {
                let xv = self.value(x).data();
                self.accumulate(grads, x, |dx| {
                    for ((d, &gv), &v) in dx.iter_mut().zip(g).zip(xv) {
                        *d += gv * if v > 0.0 { 1.0 } else { v.exp() };
                    }
                });
            }
            &Op::Flatten(x) => {
                self.accumulate(grads, x, |dx| add_into(dx, g));
            }
            &Op::Add(a, b) => {
                self.accumulate(grads, a, |da| add_into(da, g));
                self.accumulate(grads, b, |db| add_into(db, g));
            }
            &Op::Sub(a, b) => {
                self.accumulate(grads, a, |da| add_into(da, g));
                self.accumulate(grads, b, |db| db.iter_mut().zip(g).for_each(|(d, &gv)| *d -= gv));
            }
            &Op::Transpose(x) => {
                let sx = self.shape(x);
                let (r, c) = (sx[0], sx[1]);
                self.accumulate(grads, x, |dx| {
                    for i in 0..r {
                        for j in 0..c {
                            dx[i * c + j] += g[j * r + i];
                        }
                    }
                });
            }
            Op::GatherRows { x, rows } => {
                let c = self.shape(*x)[1];
                self.accumulate(grads, *x, |dx| {
                    for (out_i, &src) in rows.iter().enumerate() {
                        add_into(&mut dx[src * c..(src + 1) * c], &g[out_i * c..(out_i + 1) * c]);
                    }
                });
            }
            &Op::Scale(x, factor) => {
                self.accumulate(grads, x, |dx| axpy(factor, g, dx));
            }
            &Op::Mean(x) => {
                let n = self.value(x).len() as f64;
                self.accumulate(grads, x, |dx| dx.iter_mut().for_each(|d| *d += g[0] / n));
            }
            &Op::FrobeniusSq(x) => {
                let xv = self.value(x).data();
                self.accumulate(grads, x, |dx| axpy(2.0 * g[0], xv, dx));
            }
            &Op::Mse(a, b) => {
                let (av, bv) = (self.value(a).data(), self.value(b).data());
                let coef = 2.0 * g[0] / av.len() as f64;
                self.accumulate(grads, a, |da| {
                    for ((d, &x), &y) in da.iter_mut().zip(av).zip(bv) {
                        *d += coef * (x - y);
                    }
                });
                self.accumulate(grads, b, |db| {
                    for ((d, &x), &y) in db.iter_mut().zip(av).zip(bv) {
                        *d -= coef * (x - y);
                    }
                });
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let c = self.shape(*logits)[1];
                let coef = g[0] / labels.len() as f64;
                self.accumulate(grads, *logits, |dl| {
                    for (i, &y) in labels.iter().enumerate() {
                        for j in 0..c {
                            let target = if j == y { 1.0 } else { 0.0 };
                            dl[i * c + j] += coef * (probs[i * c + j] - target);
                        }
                    }
                });
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // Four partial sums so the loop vectorizes.
    let mut acc = [0.0; 4];
    let split = n - n % 4;
    for (ca, cb) in a[..split].chunks_exact(4).zip(b[..split].chunks_exact(4)) {
        for l in 0..4 {
            acc[l] += ca[l] * cb[l];
        }
    }
    let tail: f64 = a[split..].iter().zip(&b[split..]).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Stride-1 valid convolution of one row into a zeroed `out`. Each output
/// sums its taps in order, blocked over 8 outputs held in registers.
fn conv_row(kern: &[f64], x: &[f64], out: &mut [f64]) {
    const W: usize = 8;
    let split = out.len() - out.len() % W;
    for (bi, oc) in out[..split].chunks_exact_mut(W).enumerate() {
        let t0 = bi * W;
        let mut acc = [0.0; W];
        for (j, &wj) in kern.iter().enumerate() {
            let xs = &x[t0 + j..t0 + j + W];
            for i in 0..W {
                acc[i] += wj * xs[i];
            }
        }
        oc.copy_from_slice(&acc);
    }
    for (ti, o) in out.iter_mut().enumerate().skip(split) {
        for (j, &wj) in kern.iter().enumerate() {
            *o += wj * x[ti + j];
        }
    }
}

/// `dk[j] += dot(g, x[j..j + g.len()])` for every tap, four taps at a time so
/// each load of `g` is shared. Same summation order as [`dot`].
fn conv_row_grad(g: &[f64], x: &[f64], dk: &mut [f64]) {
    const J: usize = 4;
    let n = g.len();
    let split = n - n % 4;
    let jsplit = dk.len() - dk.len() % J;
    for (jb, dc) in dk[..jsplit].chunks_exact_mut(J).enumerate() {
        let j0 = jb * J;
        let mut acc = [[0.0; 4]; J];
        for (ci, gc) in g[..split].chunks_exact(4).enumerate() {
            let t = ci * 4;
            for (jj, a) in acc.iter_mut().enumerate() {
                let xs = &x[j0 + jj + t..j0 + jj + t + 4];
                for l in 0..4 {
                    a[l] += gc[l] * xs[l];
                }
            }
        }
        for (jj, (d, a)) in dc.iter_mut().zip(&acc).enumerate() {
            let xs = &x[j0 + jj + split..j0 + jj + n];
            let tail: f64 = g[split..].iter().zip(xs).map(|(p, q)| p * q).sum();
            *d += (a[0] + a[1]) + (a[2] + a[3]) + tail;
        }
    }
    for (j, d) in dk.iter_mut().enumerate().skip(jsplit) {
        *d += dot(g, &x[j..j + n]);
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn add_into(dst: &mut [f64], src: &[f64]) {
    dst.iter_mut().zip(src).for_each(|(d, &s)| *d += s);
}

fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn matmul_nn(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * n];
    for r in 0..m {
        let orow = &mut out[r * n..(r + 1) * n];
        for c in 0..k {
            axpy(a[r * k + c], &b[c * n..(c + 1) * n], orow);
        }
    }
    out
}
