//! Reverse-mode autodiff over a flat tape of matrix-valued nodes.
//!
//! Every node is a row-major (rows, cols) f64 matrix; scalars are (1,1).
//! Forward evaluation is eager: creating an op computes its value. `backward`
//! walks the tape in reverse creation order, which fixes the gradient
//! accumulation order and keeps training bit-deterministic.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::numerics::linalg::{gemm, matmul};
use crate::numerics::tensor::Tensor;

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

/// Attention visibility mask: `hidden[i*len+j]` true means position j is
/// invisible to position i (the -inf entries of the additive mask).
#[derive(Debug, Clone)]
pub struct Mask {
    pub len: usize,
    hidden: Vec<bool>,
}

impl Mask {
    /// All positions visible (additive mask of zeros).
    pub fn full(len: usize) -> Mask {
        Mask {
            len,
            hidden: vec![false; len * len],
        }
    }

    /// Strictly-upper-triangular hide: position i sees only j <= i.
    pub fn causal(len: usize) -> Mask {
        let mut hidden = vec![false; len * len];
        for i in 0..len {
            for j in (i + 1)..len {
                hidden[i * len + j] = true;
            }
        }
        Mask { len, hidden }
    }

    /// Validates an additive (L,L) mask tensor whose entries must be exactly
    /// 0 (visible) or -inf (hidden), with at least one visible entry per row.
    pub fn from_tensor(t: &Tensor) -> Result<Mask> {
        if t.rank() != 2 || t.shape()[0] != t.shape()[1] {
            return Err(Error::dimension(
                "mask",
                format!("expected square (L,L) mask, got {:?}", t.shape()),
            ));
        }
        let len = t.shape()[0];
        let mut hidden = vec![false; len * len];
        for (i, &v) in t.data().iter().enumerate() {
            if v == 0.0 {
                hidden[i] = false;
            } else if v == f64::NEG_INFINITY {
                hidden[i] = true;
            } else {
                return Err(Error::Data(format!(
                    "mask entries must be 0 or -inf, found {} at flat index {}",
                    v, i
                )));
            }
        }
        let mask = Mask { len, hidden };
        for row in 0..len {
            if mask.row_fully_hidden(row) {
                return Err(Error::DegenerateMask { row });
            }
        }
        Ok(mask)
    }

    pub fn is_hidden(&self, i: usize, j: usize) -> bool {
        self.hidden[i * self.len + j]
    }

    fn row_fully_hidden(&self, row: usize) -> bool {
        self.hidden[row * self.len..(row + 1) * self.len].iter().all(|&h| h)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    /// C = A * B
    MatMul(Var, Var),
    /// C = A * B^T with B stored (n, k)
    MatMulTransB(Var, Var),
    Add(Var, Var),
    AddN(Vec<Var>),
    /// (r,c) + broadcast (1,c)
    AddBias(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    SoftmaxMasked(Var, Rc<Mask>),
    /// Per-row normalization; cache holds (mean, inv_std) per row.
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: Vec<(f64, f64)>,
    },
    SliceCols(Var, usize),
    SliceRows(Var, usize),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    /// Mean squared error against a constant target.
    MseLoss(Var, Rc<Vec<f64>>),
}

struct Node {
    rows: usize,
    cols: usize,
    value: Vec<f64>,
    grad: Option<Vec<f64>>,
    needs_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, rows: usize, cols: usize, value: Vec<f64>, needs_grad: bool, op: Op) -> Var {
        debug_assert_eq!(value.len(), rows * cols);
        self.nodes.push(Node {
            rows,
            cols,
            value,
            grad: None,
            needs_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    pub fn leaf(&mut self, rows: usize, cols: usize, data: &[f64], needs_grad: bool) -> Var {
        assert_eq!(data.len(), rows * cols, "leaf: data length");
        self.push(rows, cols, data.to_vec(), needs_grad, Op::Leaf)
    }

    /// Leaf from a tensor viewed as (leading, trailing) matrix; `needs_grad`
    /// follows the tensor's flag.
    pub fn leaf_tensor(&mut self, t: &Tensor) -> Var {
        let (rows, cols) = t.as_matrix_view();
        self.leaf(rows, cols, t.data(), t.requires_grad)
    }

    pub fn dims(&self, v: Var) -> (usize, usize) {
        let n = &self.nodes[v.0];
        (n.rows, n.cols)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].grad.as_deref()
    }

    fn needs(&self, vs: &[Var]) -> bool {
        vs.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.dims(a);
        let (kb, n) = self.dims(b);
        if ka != kb {
            return Err(Error::dimension(
                "matmul",
                format!("({m},{ka}) x ({kb},{n})"),
            ));
        }
        let value = matmul(m, ka, n, self.value(a), false, self.value(b), false);
        let ng = self.needs(&[a, b]);
        Ok(self.push(m, n, value, ng, Op::MatMul(a, b)))
    }

    /// C = A * B^T where B is stored (n, k).
    pub fn matmul_trans_b(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, ka) = self.dims(a);
        let (n, kb) = self.dims(b);
        if ka != kb {
            return Err(Error::dimension(
                "matmul_trans_b",
                format!("({m},{ka}) x ({n},{kb})^T"),
            ));
        }
        let value = matmul(m, ka, n, self.value(a), false, self.value(b), true);
        let ng = self.needs(&[a, b]);
        Ok(self.push(m, n, value, ng, Op::MatMulTransB(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let da = self.dims(a);
        let db = self.dims(b);
        if da != db {
            return Err(Error::dimension("add", format!("{da:?} vs {db:?}")));
        }
        let value: Vec<f64> = self
            .value(a)
            .iter()
            .zip(self.value(b))
            .map(|(x, y)| x + y)
            .collect();
        let ng = self.needs(&[a, b]);
        Ok(self.push(da.0, da.1, value, ng, Op::Add(a, b)))
    }

    pub fn add_n(&mut self, vs: &[Var]) -> Result<Var> {
        if vs.is_empty() {
            return Err(Error::dimension("add_n", "empty operand list".to_string()));
        }
        let d0 = self.dims(vs[0]);
        for &v in &vs[1..] {
            if self.dims(v) != d0 {
                return Err(Error::dimension(
                    "add_n",
                    format!("{:?} vs {:?}", d0, self.dims(v)),
                ));
            }
        }
        let mut value = self.value(vs[0]).to_vec();
        for &v in &vs[1..] {
            for (o, x) in value.iter_mut().zip(self.value(v)) {
                *o += x;
            }
        }
        let ng = self.needs(vs);
        Ok(self.push(d0.0, d0.1, value, ng, Op::AddN(vs.to_vec())))
    }

    /// x (r,c) plus bias (1,c) broadcast over rows.
    pub fn add_bias(&mut self, x: Var, b: Var) -> Result<Var> {
        let (r, c) = self.dims(x);
        let db = self.dims(b);
        if db != (1, c) {
            return Err(Error::dimension(
                "add_bias",
                format!("x ({r},{c}) with bias {db:?}, expected (1,{c})"),
            ));
        }
        let bias = self.value(b).to_vec();
        let mut value = self.value(x).to_vec();
        for row in value.chunks_mut(c) {
            for (o, bv) in row.iter_mut().zip(&bias) {
                *o += bv;
            }
        }
        let ng = self.needs(&[x, b]);
        Ok(self.push(r, c, value, ng, Op::AddBias(x, b)))
    }

    /// x*w + b with w stored (in, out) and bias (1, out).
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let y = self.matmul(x, w)?;
        self.add_bias(y, b)
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        let (r, c) = self.dims(x);
        let value: Vec<f64> = self.value(x).iter().map(|v| v * s).collect();
        let ng = self.needs(&[x]);
        self.push(r, c, value, ng, Op::Scale(x, s))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let (r, c) = self.dims(x);
        let value: Vec<f64> = self.value(x).iter().map(|v| v.max(0.0)).collect();
        let ng = self.needs(&[x]);
        self.push(r, c, value, ng, Op::Relu(x))
    }

    /// Row-wise softmax of (scores + additive mask); hidden positions are
    /// exactly zero in the output.
    pub fn softmax_masked(&mut self, x: Var, mask: Rc<Mask>) -> Result<Var> {
        let (r, c) = self.dims(x);
        if r != mask.len || c != mask.len {
            return Err(Error::dimension(
                "softmax_masked",
                format!("scores ({r},{c}) vs mask ({},{})", mask.len, mask.len),
            ));
        }
        let value = softmax_masked_kernel(self.value(x), r, &mask)?;
        let ng = self.needs(&[x]);
        Ok(self.push(r, c, value, ng, Op::SoftmaxMasked(x, mask)))
    }

    /// Per-row layer normalization with learnable (1,c) gamma and beta.
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: f64) -> Result<Var> {
        let (r, c) = self.dims(x);
        if self.dims(gamma) != (1, c) || self.dims(beta) != (1, c) {
            return Err(Error::dimension(
                "layer_norm",
                format!(
                    "x ({r},{c}) with gamma {:?}, beta {:?}, expected (1,{c})",
                    self.dims(gamma),
                    self.dims(beta)
                ),
            ));
        }
        let mut value = vec![0.0; r * c];
        let mut cache = Vec::with_capacity(r);
        {
            let xs = self.value(x);
            let g = self.value(gamma);
            let bt = self.value(beta);
            for row in 0..r {
                let xr = &xs[row * c..(row + 1) * c];
                let mean = xr.iter().sum::<f64>() / c as f64;
                let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
                let inv_std = 1.0 / (var + eps).sqrt();
                cache.push((mean, inv_std));
                for j in 0..c {
                    value[row * c + j] = (xr[j] - mean) * inv_std * g[j] + bt[j];
                }
            }
        }
        let ng = self.needs(&[x, gamma, beta]);
        Ok(self.push(r, c, value, ng, Op::LayerNorm { x, gamma, beta, cache }))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start + len > c {
            return Err(Error::dimension(
                "slice_cols",
                format!("cols [{start}, {}) out of bounds for {c}", start + len),
            ));
        }
        let mut value = Vec::with_capacity(r * len);
        let xs = self.value(x);
        for row in 0..r {
            value.extend_from_slice(&xs[row * c + start..row * c + start + len]);
        }
        let ng = self.needs(&[x]);
        Ok(self.push(r, len, value, ng, Op::SliceCols(x, start)))
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (r, c) = self.dims(x);
        if start + len > r {
            return Err(Error::dimension(
                "slice_rows",
                format!("rows [{start}, {}) out of bounds for {r}", start + len),
            ));
        }
        let value = self.value(x)[start * c..(start + len) * c].to_vec();
        let ng = self.needs(&[x]);
        Ok(self.push(len, c, value, ng, Op::SliceRows(x, start)))
    }

    pub fn concat_cols(&mut self, vs: &[Var]) -> Result<Var> {
        if vs.is_empty() {
            return Err(Error::dimension("concat_cols", "empty operand list".to_string()));
        }
        let r = self.dims(vs[0]).0;
        let mut total = 0;
        for &v in vs {
            let (rv, cv) = self.dims(v);
            if rv != r {
                return Err(Error::dimension(
                    "concat_cols",
                    format!("row mismatch: {r} vs {rv}"),
                ));
            }
            total += cv;
        }
        let mut value = Vec::with_capacity(r * total);
        for row in 0..r {
            for &v in vs {
                let (_, cv) = self.dims(v);
                let xs = self.value(v);
                value.extend_from_slice(&xs[row * cv..(row + 1) * cv]);
            }
        }
        let ng = self.needs(vs);
        Ok(self.push(r, total, value, ng, Op::ConcatCols(vs.to_vec())))
    }

    pub fn concat_rows(&mut self, vs: &[Var]) -> Result<Var> {
        if vs.is_empty() {
            return Err(Error::dimension("concat_rows", "empty operand list".to_string()));
        }
        let c = self.dims(vs[0]).1;
        let mut total = 0;
        let mut value = Vec::new();
        for &v in vs {
            let (rv, cv) = self.dims(v);
            if cv != c {
                return Err(Error::dimension(
                    "concat_rows",
                    format!("col mismatch: {c} vs {cv}"),
                ));
            }
            total += rv;
            value.extend_from_slice(self.value(v));
        }
        let ng = self.needs(vs);
        Ok(self.push(total, c, value, ng, Op::ConcatRows(vs.to_vec())))
    }

    /// Scalar mean over all entries of (pred - target)^2.
    pub fn mse_loss(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let (r, c) = self.dims(pred);
        if target.len() != r * c {
            return Err(Error::dimension(
                "mse_loss",
                format!("pred ({r},{c}) vs target of {} elements", target.len()),
            ));
        }
        let n = (r * c) as f64;
        let loss = self
            .value(pred)
            .iter()
            .zip(target)
            .map(|(p, t)| (p - t) * (p - t))
            .sum::<f64>()
            / n;
        let ng = self.needs(&[pred]);
        Ok(self.push(1, 1, vec![loss], ng, Op::MseLoss(pred, Rc::new(target.to_vec()))))
    }

    fn add_grad(&mut self, v: Var, delta: &[f64]) {
        let node = &mut self.nodes[v.0];
        if !node.needs_grad {
            return;
        }
        let grad = node.grad.get_or_insert_with(|| vec![0.0; node.rows * node.cols]);
        debug_assert_eq!(grad.len(), delta.len());
        for (g, d) in grad.iter_mut().zip(delta) {
            *g += d;
        }
    }

    /// Backpropagates from a scalar node, accumulating gradients into every
    /// `needs_grad` node on its path. Reverse creation order fixes the
    /// accumulation order.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let (r, c) = self.dims(loss);
        if r * c != 1 {
            return Err(Error::dimension(
                "backward",
                format!("loss must be scalar, got ({r},{c})"),
            ));
        }
        if !self.nodes[loss.0].needs_grad {
            // Constant loss: nothing depends on a differentiable leaf.
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            if !self.nodes[i].needs_grad || self.nodes[i].grad.is_none() {
                continue;
            }
            let g = self.nodes[i].grad.take().unwrap();
            let op = self.nodes[i].op.clone();
            self.backprop_op(i, &op, &g);
            self.nodes[i].grad = Some(g);
        }
        Ok(())
    }

    fn backprop_op(&mut self, node: usize, op: &Op, g: &[f64]) {
        match op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = self.dims(*a);
                let (_, n) = self.dims(*b);
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![0.0; m * k];
                    gemm(&mut da, 0.0, m, n, k, g, false, self.value(*b), true);
                    self.add_grad(*a, &da);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![0.0; k * n];
                    gemm(&mut db, 0.0, k, m, n, self.value(*a), true, g, false);
                    self.add_grad(*b, &db);
                }
            }
            Op::MatMulTransB(a, b) => {
                let (m, k) = self.dims(*a);
                let (n, _) = self.dims(*b);
                if self.nodes[a.0].needs_grad {
                    let mut da = vec![0.0; m * k];
                    gemm(&mut da, 0.0, m, n, k, g, false, self.value(*b), false);
                    self.add_grad(*a, &da);
                }
                if self.nodes[b.0].needs_grad {
                    let mut db = vec![0.0; n * k];
                    gemm(&mut db, 0.0, n, m, k, g, true, self.value(*a), false);
                    self.add_grad(*b, &db);
                }
            }
            Op::Add(a, b) => {
                self.add_grad(*a, g);
                self.add_grad(*b, g);
            }
            Op::AddN(vs) => {
                for &v in vs {
                    self.add_grad(v, g);
                }
            }
            Op::AddBias(x, b) => {
                self.add_grad(*x, g);
                let (_, c) = self.dims(*x);
                let mut db = vec![0.0; c];
                for row in g.chunks(c) {
                    for (o, gv) in db.iter_mut().zip(row) {
                        *o += gv;
                    }
                }
                self.add_grad(*b, &db);
            }
            Op::Scale(x, s) => {
                let dx: Vec<f64> = g.iter().map(|v| v * s).collect();
                self.add_grad(*x, &dx);
            }
            Op::Relu(x) => {
                let dx: Vec<f64> = self
                    .value(*x)
                    .iter()
                    .zip(g)
                    .map(|(xv, gv)| if *xv > 0.0 { *gv } else { 0.0 })
                    .collect();
                self.add_grad(*x, &dx);
            }
            Op::SoftmaxMasked(x, _mask) => {
                let (r, c) = self.dims(*x);
                let dx = {
                    let y = &self.nodes[node].value;
                    let mut dx = vec![0.0; r * c];
                    for row in 0..r {
                        let ys = &y[row * c..(row + 1) * c];
                        let gs = &g[row * c..(row + 1) * c];
                        let dot: f64 = ys.iter().zip(gs).map(|(yv, gv)| yv * gv).sum();
                        for j in 0..c {
                            dx[row * c + j] = ys[j] * (gs[j] - dot);
                        }
                    }
                    dx
                };
                self.add_grad(*x, &dx);
            }
            Op::LayerNorm { x, gamma, beta, cache } => {
                let (r, c) = self.dims(*x);
                let (dx, dgamma, dbeta) = {
                    let xs = self.value(*x);
                    let gm = self.value(*gamma);
                    let mut dx = vec![0.0; r * c];
                    let mut dgamma = vec![0.0; c];
                    let mut dbeta = vec![0.0; c];
                    for row in 0..r {
                        let (mean, inv_std) = cache[row];
                        let xr = &xs[row * c..(row + 1) * c];
                        let gr = &g[row * c..(row + 1) * c];
                        let mut mean_dxh = 0.0;
                        let mut mean_dxh_xh = 0.0;
                        for j in 0..c {
                            let xh = (xr[j] - mean) * inv_std;
                            let dxh = gr[j] * gm[j];
                            dbeta[j] += gr[j];
                            dgamma[j] += gr[j] * xh;
                            mean_dxh += dxh;
                            mean_dxh_xh += dxh * xh;
                        }
                        mean_dxh /= c as f64;
                        mean_dxh_xh /= c as f64;
                        for j in 0..c {
                            let xh = (xr[j] - mean) * inv_std;
                            let dxh = gr[j] * gm[j];
                            dx[row * c + j] = inv_std * (dxh - mean_dxh - xh * mean_dxh_xh);
                        }
                    }
                    (dx, dgamma, dbeta)
                };
                self.add_grad(*x, &dx);
                self.add_grad(*gamma, &dgamma);
                self.add_grad(*beta, &dbeta);
            }
            Op::SliceCols(x, start) => {
                let (r, c) = self.dims(*x);
                let (_, len) = {
                    let n = &self.nodes[node];
                    (n.rows, n.cols)
                };
                let mut dx = vec![0.0; r * c];
                for row in 0..r {
                    dx[row * c + start..row * c + start + len].copy_from_slice(&g[row * len..(row + 1) * len]);
                }
                self.add_grad(*x, &dx);
            }
            Op::SliceRows(x, start) => {
                let (r, c) = self.dims(*x);
                let len = self.nodes[node].rows;
                let mut dx = vec![0.0; r * c];
                dx[start * c..(start + len) * c].copy_from_slice(g);
                self.add_grad(*x, &dx);
            }
            Op::ConcatCols(vs) => {
                let r = self.nodes[node].rows;
                let total = self.nodes[node].cols;
                let mut offset = 0;
                for &v in vs {
                    let (_, cv) = self.dims(v);
                    if self.nodes[v.0].needs_grad {
                        let mut dv = vec![0.0; r * cv];
                        for row in 0..r {
                            dv[row * cv..(row + 1) * cv]
                                .copy_from_slice(&g[row * total + offset..row * total + offset + cv]);
                        }
                        self.add_grad(v, &dv);
                    }
                    offset += cv;
                }
            }
            Op::ConcatRows(vs) => {
                let c = self.nodes[node].cols;
                let mut offset = 0;
                for &v in vs {
                    let (rv, _) = self.dims(v);
                    if self.nodes[v.0].needs_grad {
                        self.add_grad(v, &g[offset * c..(offset + rv) * c]);
                    }
                    offset += rv;
                }
            }
            Op::MseLoss(pred, target) => {
                let (r, c) = self.dims(*pred);
                let n = (r * c) as f64;
                let scale = g[0] * 2.0 / n;
                let dp: Vec<f64> = self
                    .value(*pred)
                    .iter()
                    .zip(target.iter())
                    .map(|(p, t)| scale * (p - t))
                    .collect();
                self.add_grad(*pred, &dp);
            }
        }
    }
}

/// Row-wise masked softmax over a (rows, rows) score matrix.
pub fn softmax_masked_kernel(scores: &[f64], rows: usize, mask: &Mask) -> Result<Vec<f64>> {
    let c = mask.len;
    debug_assert_eq!(scores.len(), rows * c);
    let mut out = vec![0.0; rows * c];
    for i in 0..rows {
        let row = &scores[i * c..(i + 1) * c];
        let mut max = f64::NEG_INFINITY;
        for j in 0..c {
            if !mask.is_hidden(i, j) && row[j] > max {
                max = row[j];
            }
        }
        if max == f64::NEG_INFINITY {
            return Err(Error::DegenerateMask { row: i });
        }
        let mut sum = 0.0;
        for j in 0..c {
            if !mask.is_hidden(i, j) {
                let e = (row[j] - max).exp();
                out[i * c + j] = e;
                sum += e;
            }
        }
        for j in 0..c {
            out[i * c + j] /= sum;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Central finite difference of a scalar function at one coordinate.
    fn fd<F: FnMut(&[f64]) -> f64>(mut f: F, x: &[f64], i: usize, h: f64) -> f64 {
        let mut xp = x.to_vec();
        xp[i] += h;
        let fp = f(&xp);
        xp[i] -= 2.0 * h;
        let fm = f(&xp);
        (fp - fm) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-4)
    }

    /// Checks analytic gradients of `build` (mapping a leaf to a scalar)
    /// against finite differences at every coordinate.
    fn check_unary<F>(build: F, x0: Vec<f64>, rows: usize, cols: usize)
    where
        F: Fn(&mut Tape, Var) -> Var,
    {
        let mut tape = Tape::new();
        let x = tape.leaf(rows, cols, &x0, true);
        let loss = build(&mut tape, x);
        tape.backward(loss).unwrap();
        let analytic = tape.grad(x).unwrap().to_vec();

        let eval = |xs: &[f64]| -> f64 {
            let mut t = Tape::new();
            let xv = t.leaf(rows, cols, xs, false);
            let l = build(&mut t, xv);
            t.value(l)[0]
        };
        for i in 0..x0.len() {
            let numeric = fd(eval, &x0, i, 1e-5);
            assert!(
                rel_err(analytic[i], numeric) < 1e-6,
                "coord {i}: analytic {} vs fd {}",
                analytic[i],
                numeric
            );
        }
    }

    #[test]
    fn matmul_values_and_grads() {
        let a0 = vec![0.5, -1.0, 2.0, 0.3, 1.1, -0.7];
        let b0 = vec![1.0, 0.2, -0.4, 0.9, 2.0, -1.5];
        let target = vec![0.1, -0.2, 0.3, 0.4];

        let mut tape = Tape::new();
        let a = tape.leaf(2, 3, &a0, true);
        let b = tape.leaf(3, 2, &b0, true);
        let c = tape.matmul(a, b).unwrap();
        let loss = tape.mse_loss(c, &target).unwrap();
        tape.backward(loss).unwrap();
        let da = tape.grad(a).unwrap().to_vec();
        let db = tape.grad(b).unwrap().to_vec();

        let eval = |av: &[f64], bv: &[f64]| -> f64 {
            let mut t = Tape::new();
            let x = t.leaf(2, 3, av, false);
            let y = t.leaf(3, 2, bv, false);
            let c = t.matmul(x, y).unwrap();
            let l = t.mse_loss(c, &target).unwrap();
            t.value(l)[0]
        };
        for i in 0..a0.len() {
            let n = fd(|v| eval(v, &b0), &a0, i, 1e-5);
            assert!(rel_err(da[i], n) < 1e-6, "dA[{i}]");
        }
        for i in 0..b0.len() {
            let n = fd(|v| eval(&a0, v), &b0, i, 1e-5);
            assert!(rel_err(db[i], n) < 1e-6, "dB[{i}]");
        }
    }

    #[test]
    fn matmul_trans_b_matches_plain_matmul() {
        // A (2,3) * B^T with B (2,3) equals matmul against transposed data.
        let a0 = vec![1.0, 2.0, 3.0, -1.0, 0.5, 2.5];
        let b0 = vec![0.3, -0.6, 1.2, 2.0, 0.1, -0.9];
        let mut tape = Tape::new();
        let a = tape.leaf(2, 3, &a0, false);
        let b = tape.leaf(2, 3, &b0, false);
        let c = tape.matmul_trans_b(a, b).unwrap();
        let mut bt = vec![0.0; 6];
        for r in 0..3 {
            for cc in 0..2 {
                bt[r * 2 + cc] = b0[cc * 3 + r];
            }
        }
        let bt_var = tape.leaf(3, 2, &bt, false);
        let c2 = tape.matmul(a, bt_var).unwrap();
        assert_eq!(tape.value(c), tape.value(c2));
    }

    #[test]
    fn matmul_trans_b_grads() {
        let a0 = vec![0.5, -1.0, 2.0, 0.3, 1.1, -0.7];
        let b0 = vec![1.0, 0.2, -0.4, 0.9, 2.0, -1.5];
        let target = vec![0.1, -0.2, 0.3, 0.4];
        let mut tape = Tape::new();
        let a = tape.leaf(2, 3, &a0, true);
        let b = tape.leaf(2, 3, &b0, true);
        let c = tape.matmul_trans_b(a, b).unwrap();
        let loss = tape.mse_loss(c, &target).unwrap();
        tape.backward(loss).unwrap();
        let da = tape.grad(a).unwrap().to_vec();
        let db = tape.grad(b).unwrap().to_vec();

        let eval = |av: &[f64], bv: &[f64]| -> f64 {
            let mut t = Tape::new();
            let x = t.leaf(2, 3, av, false);
            let y = t.leaf(2, 3, bv, false);
            let c = t.matmul_trans_b(x, y).unwrap();
            let l = t.mse_loss(c, &target).unwrap();
            t.value(l)[0]
        };
        for i in 0..a0.len() {
            assert!(rel_err(da[i], fd(|v| eval(v, &b0), &a0, i, 1e-5)) < 1e-6);
            assert!(rel_err(db[i], fd(|v| eval(&a0, v), &b0, i, 1e-5)) < 1e-6);
        }
    }

    #[test]
    fn elementwise_op_grads() {
        let x0 = vec![0.7, -0.3, 1.9, -2.2, 0.4, 0.9];
        let tgt = vec![0.5; 6];
        check_unary(
            |t, x| {
                let y = t.relu(x);
                let z = t.scale(y, 1.7);
                t.mse_loss(z, &tgt).unwrap()
            },
            x0.clone(),
            2,
            3,
        );
        check_unary(
            |t, x| {
                let y = t.add(x, x).unwrap();
                t.mse_loss(y, &tgt).unwrap()
            },
            x0,
            2,
            3,
        );
    }

    #[test]
    fn bias_and_concat_slice_grads() {
        let x0 = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let tgt = vec![0.0; 2];
        check_unary(
            |t, x| {
                let a = t.slice_cols(x, 0, 2).unwrap();
                let b = t.slice_cols(x, 1, 2).unwrap();
                let cat = t.concat_cols(&[a, b]).unwrap();
                let r0 = t.slice_rows(cat, 0, 1).unwrap();
                let r1 = t.slice_rows(cat, 1, 1).unwrap();
                let stack = t.concat_rows(&[r1, r0]).unwrap();
                let left = t.slice_cols(stack, 0, 2).unwrap();
                let right = t.slice_cols(stack, 2, 2).unwrap();
                let sum = t.add(left, right).unwrap();
                let row = t.slice_rows(sum, 0, 1).unwrap();
                t.mse_loss(row, &tgt).unwrap()
            },
            x0,
            2,
            3,
        );

        // AddBias gradient for both operands.
        let xb = vec![0.4, -0.9, 1.2, 0.8, -0.1, 0.05];
        let b0 = vec![0.3, -0.2, 0.6];
        let tgt = vec![0.1; 6];
        let mut tape = Tape::new();
        let x = tape.leaf(2, 3, &xb, true);
        let b = tape.leaf(1, 3, &b0, true);
        let y = tape.add_bias(x, b).unwrap();
        let loss = tape.mse_loss(y, &tgt).unwrap();
        tape.backward(loss).unwrap();
        let db = tape.grad(b).unwrap().to_vec();
        let eval = |bv: &[f64]| -> f64 {
            let mut t = Tape::new();
            let x = t.leaf(2, 3, &xb, false);
            let b = t.leaf(1, 3, bv, false);
            let y = t.add_bias(x, b).unwrap();
            let l = t.mse_loss(y, &tgt).unwrap();
            t.value(l)[0]
        };
        for i in 0..3 {
            assert!(rel_err(db[i], fd(eval, &b0, i, 1e-5)) < 1e-6);
        }
    }

    #[test]
    fn softmax_masked_values() {
        let mut tape = Tape::new();
        let x = tape.leaf(1, 2, &[1.0, 0.0], false);
        // Single-row mask over a length-2 sequence is not square; emulate the
        // (1,2) example by a 2x2 score matrix and checking row 0.
        let x2 = tape.leaf(2, 2, &[1.0, 0.0, 0.0, 0.0], false);
        let full = Rc::new(Mask::full(2));
        let y = tape.softmax_masked(x2, full).unwrap();
        let v = tape.value(y);
        assert!((v[0] - 0.7311).abs() < 1e-4);
        assert!((v[1] - 0.2689).abs() < 1e-4);
        assert!((v[2] - 0.5).abs() < 1e-12);
        assert!((v[3] - 0.5).abs() < 1e-12);
        let _ = x;

        let causal = Rc::new(Mask::causal(2));
        let x3 = tape.leaf(2, 2, &[5.0, 9.0, 1.0, 1.0], false);
        let y = tape.softmax_masked(x3, causal).unwrap();
        let v = tape.value(y);
        assert_eq!(v[0], 1.0);
        assert_eq!(v[1], 0.0); // hidden position exactly zero
        assert!((v[2] - 0.5).abs() < 1e-12);
        // Rows sum to one.
        assert!((v[0] + v[1] - 1.0).abs() < 1e-6);
        assert!((v[2] + v[3] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn softmax_masked_grads() {
        let x0 = vec![0.3, -0.8, 1.4, 0.2, 0.9, -0.5, -1.1, 0.6, 0.0];
        for mask in [Mask::full(3), Mask::causal(3)] {
            let mask = Rc::new(mask);
            check_unary(
                |t, x| {
                    let y = t.softmax_masked(x, Rc::clone(&mask)).unwrap();
                    t.mse_loss(y, &[0.2; 9]).unwrap()
                },
                x0.clone(),
                3,
                3,
            );
        }
    }

    #[test]
    fn layer_norm_values_and_grads() {
        // gamma=1, beta=0: each row becomes zero-mean, unit-variance.
        let mut tape = Tape::new();
        let x = tape.leaf(1, 4, &[1.0, 2.0, 3.0, 4.0], false);
        let g = tape.leaf(1, 4, &[1.0; 4], false);
        let b = tape.leaf(1, 4, &[0.0; 4], false);
        let y = tape.layer_norm(x, g, b, 1e-12).unwrap();
        let v = tape.value(y);
        let mean: f64 = v.iter().sum::<f64>() / 4.0;
        let var: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-9);

        // Gradients for x, gamma, beta against finite differences.
        let x0 = vec![0.5, -1.5, 2.5, 0.1, 0.0, 3.0, -2.0, 1.0];
        let g0 = vec![1.2, 0.8, -0.5, 1.0];
        let b0 = vec![0.1, -0.3, 0.0, 0.7];
        let tgt = vec![0.2; 8];
        let eval = |xv: &[f64], gv: &[f64], bv: &[f64]| -> f64 {
            let mut t = Tape::new();
            let x = t.leaf(2, 4, xv, false);
            let g = t.leaf(1, 4, gv, false);
            let b = t.leaf(1, 4, bv, false);
            let y = t.layer_norm(x, g, b, 1e-5).unwrap();
            let l = t.mse_loss(y, &tgt).unwrap();
            t.value(l)[0]
        };
        let mut tape = Tape::new();
        let x = tape.leaf(2, 4, &x0, true);
        let g = tape.leaf(1, 4, &g0, true);
        let b = tape.leaf(1, 4, &b0, true);
        let y = tape.layer_norm(x, g, b, 1e-5).unwrap();
        let loss = tape.mse_loss(y, &tgt).unwrap();
        tape.backward(loss).unwrap();
        let dx = tape.grad(x).unwrap().to_vec();
        let dg = tape.grad(g).unwrap().to_vec();
        let db = tape.grad(b).unwrap().to_vec();
        for i in 0..x0.len() {
            assert!(rel_err(dx[i], fd(|v| eval(v, &g0, &b0), &x0, i, 1e-6)) < 1e-5, "dx[{i}]");
        }
        for i in 0..4 {
            assert!(rel_err(dg[i], fd(|v| eval(&x0, v, &b0), &g0, i, 1e-6)) < 1e-5, "dg[{i}]");
            assert!(rel_err(db[i], fd(|v| eval(&x0, &g0, v), &b0, i, 1e-6)) < 1e-5, "db[{i}]");
        }
    }

    #[test]
    fn add_n_sums_and_distributes_grad() {
        let mut tape = Tape::new();
        let a = tape.leaf(1, 1, &[1.0], true);
        let b = tape.leaf(1, 1, &[2.0], true);
        let c = tape.leaf(1, 1, &[3.0], true);
        let s = tape.add_n(&[a, b, c]).unwrap();
        assert_eq!(tape.value(s), &[6.0]);
        let loss = tape.scale(s, 2.0);
        tape.backward(loss).unwrap();
        assert_eq!(tape.grad(a).unwrap(), &[2.0]);
        assert_eq!(tape.grad(b).unwrap(), &[2.0]);
        assert_eq!(tape.grad(c).unwrap(), &[2.0]);
    }

    #[test]
    fn fully_masked_row_is_rejected() {
        let t = Tensor::additive_mask(2, vec![0.0, f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY]).unwrap();
        match Mask::from_tensor(&t) {
            Err(Error::DegenerateMask { row }) => assert_eq!(row, 1),
            other => panic!("expected degenerate mask error, got {other:?}"),
        }
    }

    #[test]
    fn mask_from_tensor_rejects_other_values() {
        let t = Tensor::matrix(1, 1, vec![-1.0]).unwrap();
        assert!(matches!(Mask::from_tensor(&t), Err(Error::Data(_))));
    }

    #[test]
    fn shape_mismatches_are_dimension_errors() {
        let mut tape = Tape::new();
        let a = tape.leaf(2, 3, &[0.0; 6], false);
        let b = tape.leaf(2, 3, &[0.0; 6], false);
        assert!(matches!(tape.matmul(a, b), Err(Error::Dimension { .. })));
        assert!(matches!(tape.add_bias(a, b), Err(Error::Dimension { .. })));
        assert!(matches!(tape.mse_loss(a, &[0.0; 5]), Err(Error::Dimension { .. })));
        assert!(matches!(tape.slice_cols(a, 2, 2), Err(Error::Dimension { .. })));
        let loss_shape = tape.add(a, b).unwrap();
        assert!(matches!(tape.backward(loss_shape), Err(Error::Dimension { .. })));
    }

    #[test]
    fn constant_graph_backward_is_a_no_op() {
        let mut tape = Tape::new();
        let a = tape.leaf(1, 2, &[1.0, 2.0], false);
        let l = tape.mse_loss(a, &[0.0, 0.0]).unwrap();
        tape.backward(l).unwrap();
        assert!(tape.grad(a).is_none());
    }
}
