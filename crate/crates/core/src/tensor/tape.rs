//! Operation tape: forward evaluation plus recorded gradient rules.

use std::collections::HashMap;

use crate::error::{Error, Result};

use super::{ParamId, ParamStore, Tensor};

/// Handle to a tensor recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NodeId(pub usize);

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul { a: usize, b: usize },
    Transpose { a: usize },
    Add { a: usize, b: usize },
    Sub { a: usize, b: usize },
    Mul { a: usize, b: usize },
    AddRows { a: usize, row: usize },
    ScaleRows { a: usize, row: usize },
    AddScalar { a: usize },
    MulScalar { a: usize, c: f64 },
    Tanh { a: usize },
    Relu { a: usize },
    Sigmoid { a: usize },
    Softplus { a: usize },
    Log { a: usize },
    Softmax { a: usize },
    LogSoftmax { a: usize },
    LayerNorm { a: usize, eps: f64 },
    MeanPool { a: usize },
    Sum { a: usize },
    ConcatCols { parts: Vec<usize> },
    ConcatRows { parts: Vec<usize> },
    EmbeddingLookup { table: usize, ids: Vec<usize> },
}

struct Node {
    tensor: Tensor,
    op: Op,
}

/// Reverse-mode tape. Nodes are appended in evaluation order, so inputs
/// always precede the operations that consume them.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
    param_nodes: HashMap<ParamId, usize>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            param_nodes: HashMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &Tensor {
        &self.nodes[id.0].tensor
    }

    /// Gradient of the last backward pass w.r.t. node `id`, if it was tracked.
    pub fn grad(&self, id: NodeId) -> Option<&[f64]> {
        self.nodes[id.0].tensor.grad.as_deref()
    }

    fn push(&mut self, mut tensor: Tensor, op: Op, requires_grad: bool) -> NodeId {
        tensor.requires_grad = requires_grad;
        tensor.grad = None;
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node { tensor, op });
        id
    }

    fn needs_grad(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].tensor.requires_grad)
    }

    /// Untracked input.
    pub fn constant(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, false)
    }

    /// Tracked input (gradient requested).
    pub fn leaf(&mut self, t: Tensor) -> NodeId {
        self.push(t, Op::Leaf, true)
    }

    /// Register a stored parameter on the tape. Frozen parameters come in as
    /// constants. Registering the same parameter twice reuses its node.
    pub fn param(&mut self, store: &ParamStore, id: ParamId) -> NodeId {
        if let Some(&n) = self.param_nodes.get(&id) {
            return NodeId(n);
        }
        let p = store.get(id);
        let node = self.push(p.value.clone(), Op::Leaf, !p.frozen);
        self.param_nodes.insert(id, node.0);
        node
    }

    // ── forward ops ──────────────────────────────────────────────────

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        let (ta, tb) = (&self.nodes[a.0].tensor, &self.nodes[b.0].tensor);
        if !ta.is_matrix() || !tb.is_matrix() || ta.cols() != tb.rows() {
            return Err(Error::dimension(
                "matmul",
                format!("{:?} x {:?}", ta.shape, tb.shape),
            ));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for p in 0..k {
                let av = ta.data[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let brow = &tb.data[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += av * brow[j];
                }
            }
        }
        let rg = self.needs_grad(&[a.0, b.0]);
        Ok(self.push(
            Tensor::from_vec(vec![m, n], out)?,
            Op::MatMul { a: a.0, b: b.0 },
            rg,
        ))
    }

    pub fn transpose(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = &self.nodes[a.0].tensor;
        if !ta.is_matrix() {
            return Err(Error::dimension("transpose", format!("{:?}", ta.shape)));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = ta.data[i * n + j];
            }
        }
        let rg = self.needs_grad(&[a.0]);
        Ok(self.push(Tensor::from_vec(vec![n, m], out)?, Op::Transpose { a: a.0 }, rg))
    }

    fn elementwise(
        &mut self,
        op_name: &'static str,
        a: NodeId,
        b: NodeId,
        f: impl Fn(f64, f64) -> f64,
        op: Op,
    ) -> Result<NodeId> {
        let (ta, tb) = (&self.nodes[a.0].tensor, &self.nodes[b.0].tensor);
        if ta.shape != tb.shape {
            return Err(Error::dimension(
                op_name,
                format!("{:?} vs {:?}", ta.shape, tb.shape),
            ));
        }
        let data = ta
            .data
            .iter()
            .zip(&tb.data)
            .map(|(&x, &y)| f(x, y))
            .collect();
        let t = Tensor::from_vec(ta.shape.clone(), data)?;
        let rg = self.needs_grad(&[a.0, b.0]);
        Ok(self.push(t, op, rg))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise("add", a, b, |x, y| x + y, Op::Add { a: a.0, b: b.0 })
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise("sub", a, b, |x, y| x - y, Op::Sub { a: a.0, b: b.0 })
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> Result<NodeId> {
        self.elementwise("mul", a, b, |x, y| x * y, Op::Mul { a: a.0, b: b.0 })
    }

    fn row_arg(&self, op: &'static str, a: NodeId, row: NodeId) -> Result<(usize, usize)> {
        let (ta, tr) = (&self.nodes[a.0].tensor, &self.nodes[row.0].tensor);
        if !ta.is_matrix() || tr.numel() != ta.cols() {
            return Err(Error::dimension(
                op,
                format!("matrix {:?} with row {:?}", ta.shape, tr.shape),
            ));
        }
        Ok((ta.rows(), ta.cols()))
    }

    /// Bias-vector addition over rows: `out[i, j] = a[i, j] + row[j]`.
    pub fn add_rows(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (m, n) = self.row_arg("add_rows", a, row)?;
        let (ta, tr) = (&self.nodes[a.0].tensor, &self.nodes[row.0].tensor);
        let mut data = ta.data.clone();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] += tr.data[j];
            }
        }
        let t = Tensor::from_vec(vec![m, n], data)?;
        let rg = self.needs_grad(&[a.0, row.0]);
        Ok(self.push(t, Op::AddRows { a: a.0, row: row.0 }, rg))
    }

    /// Per-column scaling over rows: `out[i, j] = a[i, j] * row[j]`.
    pub fn scale_rows(&mut self, a: NodeId, row: NodeId) -> Result<NodeId> {
        let (m, n) = self.row_arg("scale_rows", a, row)?;
        let (ta, tr) = (&self.nodes[a.0].tensor, &self.nodes[row.0].tensor);
        let mut data = ta.data.clone();
        for i in 0..m {
            for j in 0..n {
                data[i * n + j] *= tr.data[j];
            }
        }
        let t = Tensor::from_vec(vec![m, n], data)?;
        let rg = self.needs_grad(&[a.0, row.0]);
        Ok(self.push(t, Op::ScaleRows { a: a.0, row: row.0 }, rg))
    }

    pub fn add_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let ta = &self.nodes[a.0].tensor;
        let t = Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().map(|&x| x + c).collect(),
            requires_grad: false,
            grad: None,
        };
        let rg = self.needs_grad(&[a.0]);
        self.push(t, Op::AddScalar { a: a.0 }, rg)
    }

    pub fn mul_scalar(&mut self, a: NodeId, c: f64) -> NodeId {
        let ta = &self.nodes[a.0].tensor;
        let t = Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().map(|&x| x * c).collect(),
            requires_grad: false,
            grad: None,
        };
        let rg = self.needs_grad(&[a.0]);
        self.push(t, Op::MulScalar { a: a.0, c }, rg)
    }

    fn unary(&mut self, a: NodeId, f: impl Fn(f64) -> f64, op: Op) -> NodeId {
        let ta = &self.nodes[a.0].tensor;
        let t = Tensor {
            shape: ta.shape.clone(),
            data: ta.data.iter().map(|&x| f(x)).collect(),
            requires_grad: false,
            grad: None,
        };
        let rg = self.needs_grad(&[a.0]);
        self.push(t, op, rg)
    }

    pub fn tanh(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::tanh, Op::Tanh { a: a.0 })
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(a, |x| x.max(0.0), Op::Relu { a: a.0 })
    }

    pub fn sigmoid(&mut self, a: NodeId) -> NodeId {
        self.unary(a, sigmoid, Op::Sigmoid { a: a.0 })
    }

    /// Numerically stable `ln(1 + e^x)`.
    pub fn softplus(&mut self, a: NodeId) -> NodeId {
        self.unary(
            a,
            |x| x.max(0.0) + (-x.abs()).exp().ln_1p(),
            Op::Softplus { a: a.0 },
        )
    }

    pub fn log(&mut self, a: NodeId) -> NodeId {
        self.unary(a, f64::ln, Op::Log { a: a.0 })
    }

    /// Row-wise softmax (stable via row-max subtraction).
    pub fn softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = &self.nodes[a.0].tensor;
        if !ta.is_matrix() {
            return Err(Error::dimension("softmax", format!("{:?}", ta.shape)));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &ta.data[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for j in 0..n {
                let e = (row[j] - mx).exp();
                data[i * n + j] = e;
                z += e;
            }
            for j in 0..n {
                data[i * n + j] /= z;
            }
        }
        let t = Tensor::from_vec(vec![m, n], data)?;
        let rg = self.needs_grad(&[a.0]);
        Ok(self.push(t, Op::Softmax { a: a.0 }, rg))
    }

    /// Row-wise log-softmax.
    pub fn log_softmax(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = &self.nodes[a.0].tensor;
        if !ta.is_matrix() {
            return Err(Error::dimension("log_softmax", format!("{:?}", ta.shape)));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &ta.data[i * n..(i + 1) * n];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = row.iter().map(|&x| (x - mx).exp()).sum::<f64>().ln() + mx;
            for j in 0..n {
                data[i * n + j] = row[j] - lse;
            }
        }
        let t = Tensor::from_vec(vec![m, n], data)?;
        let rg = self.needs_grad(&[a.0]);
        Ok(self.push(t, Op::LogSoftmax { a: a.0 }, rg))
    }

    /// Row-wise layer normalization, before any affine transform.
    pub fn layer_norm(&mut self, a: NodeId, eps: f64) -> Result<NodeId> {
        let ta = &self.nodes[a.0].tensor;
        if !ta.is_matrix() {
            return Err(Error::dimension("layer_norm", format!("{:?}", ta.shape)));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let row = &ta.data[i * n..(i + 1) * n];
            let mean = row.iter().sum::<f64>() / n as f64;
            let var = row.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
            let inv = 1.0 / (var + eps).sqrt();
            for j in 0..n {
                data[i * n + j] = (row[j] - mean) * inv;
            }
        }
        let t = Tensor::from_vec(vec![m, n], data)?;
        let rg = self.needs_grad(&[a.0]);
        Ok(self.push(t, Op::LayerNorm { a: a.0, eps }, rg))
    }

    /// Mean over rows: `m x n -> 1 x n`.
    pub fn mean_pool(&mut self, a: NodeId) -> Result<NodeId> {
        let ta = &self.nodes[a.0].tensor;
        if !ta.is_matrix() {
            return Err(Error::dimension("mean_pool", format!("{:?}", ta.shape)));
        }
        let (m, n) = (ta.rows(), ta.cols());
        let mut data = vec![0.0; n];
        for i in 0..m {
            for j in 0..n {
                data[j] += ta.data[i * n + j];
            }
        }
        for v in &mut data {
            *v /= m as f64;
        }
        let t = Tensor::from_vec(vec![1, n], data)?;
        let rg = self.needs_grad(&[a.0]);
        Ok(self.push(t, Op::MeanPool { a: a.0 }, rg))
    }

    /// Total sum -> scalar of shape `[1]`.
    pub fn sum(&mut self, a: NodeId) -> NodeId {
        let ta = &self.nodes[a.0].tensor;
        let t = Tensor::scalar(ta.data.iter().sum());
        let rg = self.needs_grad(&[a.0]);
        self.push(t, Op::Sum { a: a.0 }, rg)
    }

    /// Concatenate matrices with equal row counts along columns.
    pub fn concat_cols(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("concat_cols of empty list"));
        }
        let m = self.nodes[parts[0].0].tensor.rows();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let t = &self.nodes[p.0].tensor;
            if !t.is_matrix() || t.rows() != m {
                return Err(Error::dimension("concat_cols", format!("{:?}", t.shape)));
            }
            widths.push(t.cols());
        }
        let n: usize = widths.iter().sum();
        let mut data = vec![0.0; m * n];
        let mut off = 0;
        for (&p, &w) in parts.iter().zip(&widths) {
            let t = &self.nodes[p.0].tensor;
            for i in 0..m {
                data[i * n + off..i * n + off + w].copy_from_slice(&t.data[i * w..(i + 1) * w]);
            }
            off += w;
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.needs_grad(&ids);
        Ok(self.push(
            Tensor::from_vec(vec![m, n], data)?,
            Op::ConcatCols { parts: ids },
            rg,
        ))
    }

    /// Stack matrices with equal column counts along rows.
    pub fn concat_rows(&mut self, parts: &[NodeId]) -> Result<NodeId> {
        if parts.is_empty() {
            return Err(Error::contract("concat_rows of empty list"));
        }
        let n = self.nodes[parts[0].0].tensor.cols();
        let mut data = Vec::new();
        let mut m = 0;
        for &p in parts {
            let t = &self.nodes[p.0].tensor;
            if !t.is_matrix() || t.cols() != n {
                return Err(Error::dimension("concat_rows", format!("{:?}", t.shape)));
            }
            data.extend_from_slice(&t.data);
            m += t.rows();
        }
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let rg = self.needs_grad(&ids);
        Ok(self.push(
            Tensor::from_vec(vec![m, n], data)?,
            Op::ConcatRows { parts: ids },
            rg,
        ))
    }

    /// Extract row `i` of a matrix as `1 x n`. Sugar over a constant one-hot
    /// matmul, so no extra gradient rule is involved.
    pub fn select_row(&mut self, m: NodeId, i: usize) -> Result<NodeId> {
        let rows = {
            let t = &self.nodes[m.0].tensor;
            if !t.is_matrix() {
                return Err(Error::dimension("select_row", format!("{:?}", t.shape)));
            }
            t.rows()
        };
        if i >= rows {
            return Err(Error::contract(format!("select_row {i} of {rows} rows")));
        }
        let mut onehot = Tensor::zeros(vec![1, rows]);
        onehot.data[i] = 1.0;
        let sel = self.constant(onehot);
        self.matmul(sel, m)
    }

    /// Gather rows of an embedding table: `ids.len() x d`.
    pub fn embedding_lookup(&mut self, table: NodeId, ids: &[usize]) -> Result<NodeId> {
        let tt = &self.nodes[table.0].tensor;
        if !tt.is_matrix() {
            return Err(Error::dimension("embedding_lookup", format!("{:?}", tt.shape)));
        }
        if ids.is_empty() {
            return Err(Error::contract("embedding_lookup with no ids"));
        }
        let (v, d) = (tt.rows(), tt.cols());
        if let Some(&bad) = ids.iter().find(|&&i| i >= v) {
            return Err(Error::contract(format!(
                "embedding id {bad} out of range for table with {v} rows"
            )));
        }
        let mut data = Vec::with_capacity(ids.len() * d);
        for &i in ids {
            data.extend_from_slice(&tt.data[i * d..(i + 1) * d]);
        }
        let rg = self.needs_grad(&[table.0]);
        Ok(self.push(
            Tensor::from_vec(vec![ids.len(), d], data)?,
            Op::EmbeddingLookup {
                table: table.0,
                ids: ids.to_vec(),
            },
            rg,
        ))
    }

    // ── backward ─────────────────────────────────────────────────────

    /// Reverse pass from a scalar loss. Fills `grad` on every tracked node
    /// at or before `loss`; grads from a previous backward call are cleared.
    pub fn backward(&mut self, loss: NodeId) -> Result<()> {
        let lt = &self.nodes[loss.0].tensor;
        if lt.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                lt.shape
            )));
        }
        if !lt.requires_grad {
            return Err(Error::contract(
                "loss is not reachable from any tracked tensor".to_string(),
            ));
        }
        for node in &mut self.nodes {
            node.tensor.grad = None;
        }
        self.nodes[loss.0].tensor.grad = Some(vec![1.0]);

        for i in (0..=loss.0).rev() {
            if !self.nodes[i].tensor.requires_grad || self.nodes[i].tensor.grad.is_none() {
                continue;
            }
            let gout = self.nodes[i].tensor.grad.clone().unwrap();
            let op = self.nodes[i].op.clone();
            self.apply_backward(i, &op, &gout);
        }
        Ok(())
    }

    fn accum(&mut self, idx: usize, contrib: &[f64]) {
        let t = &mut self.nodes[idx].tensor;
        if !t.requires_grad {
            return;
        }
        let g = t.grad.get_or_insert_with(|| vec![0.0; t.data.len()]);
        for (gi, ci) in g.iter_mut().zip(contrib) {
            *gi += ci;
        }
    }

    fn apply_backward(&mut self, i: usize, op: &Op, gout: &[f64]) {
        match *op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (m, k) = {
                    let ta = &self.nodes[a].tensor;
                    (ta.rows(), ta.cols())
                };
                let n = self.nodes[b].tensor.cols();
                if self.nodes[a].tensor.requires_grad {
                    // dA = dC . B^T
                    let tb = &self.nodes[b].tensor;
                    let mut da = vec![0.0; m * k];
                    for r in 0..m {
                        for j in 0..n {
                            let g = gout[r * n + j];
                            if g == 0.0 {
                                continue;
                            }
                            for p in 0..k {
                                da[r * k + p] += g * tb.data[p * n + j];
                            }
                        }
                    }
                    self.accum(a, &da);
                }
                if self.nodes[b].tensor.requires_grad {
                    // dB = A^T . dC
                    let ta: Vec<f64> = self.nodes[a].tensor.data.clone();
                    let mut db = vec![0.0; k * n];
                    for r in 0..m {
                        for p in 0..k {
                            let av = ta[r * k + p];
                            if av == 0.0 {
                                continue;
                            }
                            for j in 0..n {
                                db[p * n + j] += av * gout[r * n + j];
                            }
                        }
                    }
                    self.accum(b, &db);
                }
            }
            Op::Transpose { a } => {
                let (n, m) = {
                    let t = &self.nodes[i].tensor;
                    (t.rows(), t.cols())
                };
                let mut da = vec![0.0; m * n];
                for r in 0..n {
                    for c in 0..m {
                        da[c * n + r] = gout[r * m + c];
                    }
                }
                self.accum(a, &da);
            }
            Op::Add { a, b } => {
                self.accum(a, gout);
                self.accum(b, gout);
            }
            Op::Sub { a, b } => {
                self.accum(a, gout);
                let neg: Vec<f64> = gout.iter().map(|&g| -g).collect();
                self.accum(b, &neg);
            }
            Op::Mul { a, b } => {
                if self.nodes[a].tensor.requires_grad {
                    let db: Vec<f64> = self.nodes[b]
                        .tensor
                        .data
                        .iter()
                        .zip(gout)
                        .map(|(&y, &g)| y * g)
                        .collect();
                    self.accum(a, &db);
                }
                if self.nodes[b].tensor.requires_grad {
                    let da: Vec<f64> = self.nodes[a]
                        .tensor
                        .data
                        .iter()
                        .zip(gout)
                        .map(|(&x, &g)| x * g)
                        .collect();
                    self.accum(b, &da);
                }
            }
            Op::AddRows { a, row } => {
                self.accum(a, gout);
                if self.nodes[row].tensor.requires_grad {
                    let n = self.nodes[row].tensor.numel();
                    let mut dr = vec![0.0; n];
                    for (idx, &g) in gout.iter().enumerate() {
                        dr[idx % n] += g;
                    }
                    self.accum(row, &dr);
                }
            }
            Op::ScaleRows { a, row } => {
                let n = self.nodes[row].tensor.numel();
                if self.nodes[a].tensor.requires_grad {
                    let rowv: Vec<f64> = self.nodes[row].tensor.data.clone();
                    let da: Vec<f64> = gout
                        .iter()
                        .enumerate()
                        .map(|(idx, &g)| g * rowv[idx % n])
                        .collect();
                    self.accum(a, &da);
                }
                if self.nodes[row].tensor.requires_grad {
                    let av: Vec<f64> = self.nodes[a].tensor.data.clone();
                    let mut dr = vec![0.0; n];
                    for (idx, &g) in gout.iter().enumerate() {
                        dr[idx % n] += g * av[idx];
                    }
                    self.accum(row, &dr);
                }
            }
            Op::AddScalar { a } => self.accum(a, gout),
            Op::MulScalar { a, c } => {
                let da: Vec<f64> = gout.iter().map(|&g| g * c).collect();
                self.accum(a, &da);
            }
            Op::Tanh { a } => {
                let da: Vec<f64> = self.nodes[i]
                    .tensor
                    .data
                    .iter()
                    .zip(gout)
                    .map(|(&y, &g)| (1.0 - y * y) * g)
                    .collect();
                self.accum(a, &da);
            }
            Op::Relu { a } => {
                let da: Vec<f64> = self.nodes[a]
                    .tensor
                    .data
                    .iter()
                    .zip(gout)
                    .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
                    .collect();
                self.accum(a, &da);
            }
            Op::Sigmoid { a } => {
                let da: Vec<f64> = self.nodes[i]
                    .tensor
                    .data
                    .iter()
                    .zip(gout)
                    .map(|(&y, &g)| y * (1.0 - y) * g)
                    .collect();
                self.accum(a, &da);
            }
            Op::Softplus { a } => {
                let da: Vec<f64> = self.nodes[a]
                    .tensor
                    .data
                    .iter()
                    .zip(gout)
                    .map(|(&x, &g)| sigmoid(x) * g)
                    .collect();
                self.accum(a, &da);
            }
            Op::Log { a } => {
                let da: Vec<f64> = self.nodes[a]
                    .tensor
                    .data
                    .iter()
                    .zip(gout)
                    .map(|(&x, &g)| g / x)
                    .collect();
                self.accum(a, &da);
            }
            Op::Softmax { a } => {
                let (m, n) = {
                    let t = &self.nodes[i].tensor;
                    (t.rows(), t.cols())
                };
                let y = self.nodes[i].tensor.data.clone();
                let mut da = vec![0.0; m * n];
                for r in 0..m {
                    let yr = &y[r * n..(r + 1) * n];
                    let gr = &gout[r * n..(r + 1) * n];
                    let dot: f64 = yr.iter().zip(gr).map(|(&yv, &gv)| yv * gv).sum();
                    for j in 0..n {
                        da[r * n + j] = yr[j] * (gr[j] - dot);
                    }
                }
                self.accum(a, &da);
            }
            Op::LogSoftmax { a } => {
                let (m, n) = {
                    let t = &self.nodes[i].tensor;
                    (t.rows(), t.cols())
                };
                let y = self.nodes[i].tensor.data.clone();
                let mut da = vec![0.0; m * n];
                for r in 0..m {
                    let gr = &gout[r * n..(r + 1) * n];
                    let gsum: f64 = gr.iter().sum();
                    for j in 0..n {
                        let p = y[r * n + j].exp();
                        da[r * n + j] = gr[j] - p * gsum;
                    }
                }
                self.accum(a, &da);
            }
            Op::LayerNorm { a, eps } => {
                let (m, n) = {
                    let t = &self.nodes[a].tensor;
                    (t.rows(), t.cols())
                };
                let x = self.nodes[a].tensor.data.clone();
                let nf = n as f64;
                let mut da = vec![0.0; m * n];
                for r in 0..m {
                    let xr = &x[r * n..(r + 1) * n];
                    let gr = &gout[r * n..(r + 1) * n];
                    let mean = xr.iter().sum::<f64>() / nf;
                    let var = xr.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / nf;
                    let inv = 1.0 / (var + eps).sqrt();
                    let yhat: Vec<f64> = xr.iter().map(|&v| (v - mean) * inv).collect();
                    let gmean = gr.iter().sum::<f64>() / nf;
                    let gydot = gr.iter().zip(&yhat).map(|(&g, &yv)| g * yv).sum::<f64>() / nf;
                    for j in 0..n {
                        da[r * n + j] = inv * (gr[j] - gmean - yhat[j] * gydot);
                    }
                }
                self.accum(a, &da);
            }
            Op::MeanPool { a } => {
                let (m, n) = {
                    let t = &self.nodes[a].tensor;
                    (t.rows(), t.cols())
                };
                let mut da = vec![0.0; m * n];
                for r in 0..m {
                    for j in 0..n {
                        da[r * n + j] = gout[j] / m as f64;
                    }
                }
                self.accum(a, &da);
            }
            Op::Sum { a } => {
                let n = self.nodes[a].tensor.numel();
                let da = vec![gout[0]; n];
                self.accum(a, &da);
            }
            Op::ConcatCols { ref parts } => {
                let (m, n) = {
                    let t = &self.nodes[i].tensor;
                    (t.rows(), t.cols())
                };
                let mut off = 0;
                for &p in parts {
                    let w = self.nodes[p].tensor.cols();
                    if self.nodes[p].tensor.requires_grad {
                        let mut dp = vec![0.0; m * w];
                        for r in 0..m {
                            dp[r * w..(r + 1) * w]
                                .copy_from_slice(&gout[r * n + off..r * n + off + w]);
                        }
                        self.accum(p, &dp);
                    }
                    off += w;
                }
            }
            Op::ConcatRows { ref parts } => {
                let n = self.nodes[i].tensor.cols();
                let mut off = 0;
                for &p in parts {
                    let r = self.nodes[p].tensor.rows();
                    if self.nodes[p].tensor.requires_grad {
                        let dp = gout[off * n..(off + r) * n].to_vec();
                        self.accum(p, &dp);
                    }
                    off += r;
                }
            }
            Op::EmbeddingLookup { table, ref ids } => {
                if self.nodes[table].tensor.requires_grad {
                    let d = self.nodes[table].tensor.cols();
                    let v = self.nodes[table].tensor.rows();
                    let mut dt = vec![0.0; v * d];
                    for (r, &id) in ids.iter().enumerate() {
                        for j in 0..d {
                            dt[id * d + j] += gout[r * d + j];
                        }
                    }
                    self.accum(table, &dt);
                }
            }
        }
    }

    /// Flat gradient vector in the store's trainable layout; zeros for
    /// parameters the recorded graph never touched.
    pub fn grads_flat(&self, store: &ParamStore) -> Vec<f64> {
        let mut out = Vec::with_capacity(store.trainable_len());
        for (pid, p) in store.iter() {
            if p.frozen {
                continue;
            }
            match self
                .param_nodes
                .get(&pid)
                .and_then(|&n| self.nodes[n].tensor.grad.as_ref())
            {
                Some(g) => out.extend_from_slice(g),
                None => out.extend(std::iter::repeat(0.0).take(p.value.numel())),
            }
        }
        out
    }

    /// Copy per-parameter gradients back onto the store tensors.
    pub fn export_grads(&self, store: &mut ParamStore) {
        for i in 0..store.len() {
            let pid = ParamId(i);
            let g = self
                .param_nodes
                .get(&pid)
                .and_then(|&n| self.nodes[n].tensor.grad.clone());
            store.get_mut(pid).value.grad = g;
        }
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
