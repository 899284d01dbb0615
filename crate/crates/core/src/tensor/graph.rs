use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{OpKind, Tensor, TensorError, LAYERNORM_EPS};

/// Handle to a tensor recorded on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

pub(crate) enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    SoftmaxRows { x: Var },
    LayerNorm { x: Var, gain: Var, bias: Var, normed: Vec<f64>, inv_std: Vec<f64> },
    Gelu(Var),
    EmbedLookup { table: Var, ids: Vec<usize> },
    ConcatRows(Vec<Var>),
    MeanRows { x: Var, keep: Vec<bool>, count: usize },
    Sigmoid(Var),
    Transpose(Var),
    SliceHeads { x: Var, head: usize, heads: usize },
    MergeHeads(Vec<Var>),
    Sum(Var),
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
    BceWithLogits { logits: Var, targets: Vec<f64> },
}

impl Op {
    pub(crate) fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::MatMul(..) => OpKind::MatMul,
            Op::Add(..) => OpKind::Add,
            Op::AddRow(..) => OpKind::AddRow,
            Op::Mul(..) => OpKind::Mul,
            Op::Scale(..) => OpKind::Scale,
            Op::SoftmaxRows { .. } => OpKind::SoftmaxRows,
            Op::LayerNorm { .. } => OpKind::LayerNorm,
            Op::Gelu(_) => OpKind::Gelu,
            Op::EmbedLookup { .. } => OpKind::EmbedLookup,
            Op::ConcatRows(_) => OpKind::ConcatRows,
            Op::MeanRows { .. } => OpKind::MeanRows,
            Op::Sigmoid(_) => OpKind::Sigmoid,
            Op::Transpose(_) => OpKind::Transpose,
            Op::SliceHeads { .. } => OpKind::SliceHeads,
            Op::MergeHeads(_) => OpKind::MergeHeads,
            Op::Sum(_) => OpKind::Sum,
            Op::CrossEntropy { .. } => OpKind::CrossEntropy,
            Op::BceWithLogits { .. } => OpKind::BceWithLogits,
        }
    }
}

pub(crate) struct Node {
    pub(crate) tensor: Tensor,
    pub(crate) op: Op,
}

/// Tape of recorded operations. Creation order is a topological order.
#[derive(Default)]
pub struct Graph {
    pub(crate) nodes: Vec<Node>,
}

fn dims_of(t: &Tensor, op: OpKind) -> Result<(usize, usize), TensorError> {
    t.dims().ok_or_else(|| TensorError::Shape {
        op,
        left: t.shape().to_vec(),
        right: Vec::new(),
    })
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub(crate) fn softplus(z: f64) -> f64 {
    z.max(0.0) + libm::log1p(libm::exp(-z.abs()))
}

pub(crate) fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * core::f64::consts::FRAC_1_SQRT_2))
}

pub(crate) fn normal_pdf(x: f64) -> f64 {
    libm::exp(-0.5 * x * x) / libm::sqrt(2.0 * core::f64::consts::PI)
}

impl Graph {
    pub fn new() -> Self {
        Graph { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Records an input. Gradients are collected for it iff the tensor
    /// `requires_grad`.
    pub fn leaf(&mut self, tensor: Tensor) -> Var {
        self.nodes.push(Node { tensor, op: Op::Leaf });
        Var(self.nodes.len() - 1)
    }

    /// Records a trainable input.
    pub fn param(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(true))
    }

    /// Records a constant input.
    pub fn constant(&mut self, tensor: Tensor) -> Var {
        self.leaf(tensor.with_requires_grad(false))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].tensor
    }

    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].tensor.grad()
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    /// Clears all accumulated gradients.
    pub fn zero_grad(&mut self) {
        for n in &mut self.nodes {
            n.tensor.zero_grad();
        }
    }

    fn dims(&self, v: Var, op: OpKind) -> Result<(usize, usize), TensorError> {
        dims_of(self.value(v), op)
    }

    fn push(&mut self, shape: Vec<usize>, values: Vec<f64>, op: Op, inputs: &[Var]) -> Var {
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].tensor.requires_grad());
        let tensor = Tensor::new(shape, values)
            .expect("op produced a consistent layout")
            .with_requires_grad(requires_grad);
        self.nodes.push(Node { tensor, op });
        Var(self.nodes.len() - 1)
    }

    fn shape_err(&self, op: OpKind, a: Var, b: Var) -> TensorError {
        TensorError::Shape {
            op,
            left: self.value(a).shape().to_vec(),
            right: self.value(b).shape().to_vec(),
        }
    }

    /// `(r x k) @ (k x c) -> (r x c)`
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        let (r, k) = self.dims(a, OpKind::MatMul)?;
        let (k2, c) = self.dims(b, OpKind::MatMul)?;
        if k != k2 {
            return Err(self.shape_err(OpKind::MatMul, a, b));
        }
        let out = matmul_raw(self.value(a).values(), self.value(b).values(), r, k, c);
        Ok(self.push(vec![r, c], out, Op::MatMul(a, b), &[a, b]))
    }

    /// Elementwise sum of two equally shaped tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(self.shape_err(OpKind::Add, a, b));
        }
        let out = zip_map(self.value(a).values(), self.value(b).values(), |x, y| x + y);
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(shape, out, Op::Add(a, b), &[a, b]))
    }

    /// Adds a length-`c` row to every row of an `r x c` matrix. This is the
    /// only broadcast supported.
    pub fn add_row(&mut self, x: Var, bias: Var) -> Result<Var, TensorError> {
        let (r, c) = self.dims(x, OpKind::AddRow)?;
        let (br, bc) = self.dims(bias, OpKind::AddRow)?;
        if br != 1 || bc != c {
            return Err(self.shape_err(OpKind::AddRow, x, bias));
        }
        let xv = self.value(x).values();
        let bv = self.value(bias).values();
        let out: Vec<f64> = (0..r * c).map(|i| xv[i] + bv[i % c]).collect();
        Ok(self.push(vec![r, c], out, Op::AddRow(x, bias), &[x, bias]))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var, TensorError> {
        if self.value(a).shape() != self.value(b).shape() {
            return Err(self.shape_err(OpKind::Mul, a, b));
        }
        let out = zip_map(self.value(a).values(), self.value(b).values(), |x, y| x * y);
        let shape = self.value(a).shape().to_vec();
        Ok(self.push(shape, out, Op::Mul(a, b), &[a, b]))
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let t = self.value(x);
        let out = t.values().iter().map(|v| v * factor).collect();
        let shape = t.shape().to_vec();
        self.push(shape, out, Op::Scale(x, factor), &[x])
    }

    /// Row-wise softmax. Each row's maximum is subtracted before
    /// exponentiation. With a column mask, masked columns (`false`) get
    /// weight exactly zero and take no part in the normalisation.
    pub fn softmax_rows(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var, TensorError> {
        let (r, c) = self.dims(x, OpKind::SoftmaxRows)?;
        if let Some(m) = mask {
            if m.len() != c {
                return Err(TensorError::Shape {
                    op: OpKind::SoftmaxRows,
                    left: self.value(x).shape().to_vec(),
                    right: vec![m.len()],
                });
            }
            if !m.iter().any(|k| *k) {
                return Err(TensorError::Contract("softmax_rows: every column is masked".into()));
            }
        }
        let keep = |j: usize| mask.is_none_or(|m| m[j]);
        let xv = self.value(x).values();
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let max = (0..c).filter(|&j| keep(j)).map(|j| row[j]).fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for j in (0..c).filter(|&j| keep(j)) {
                let e = libm::exp(row[j] - max);
                out[i * c + j] = e;
                total += e;
            }
            for v in &mut out[i * c..(i + 1) * c] {
                *v /= total;
            }
        }
        let op = Op::SoftmaxRows { x };
        Ok(self.push(vec![r, c], out, op, &[x]))
    }

    /// Row-wise layer normalisation followed by the affine `gain`, `bias`
    /// (both length-`c` rows).
    pub fn layernorm(&mut self, x: Var, gain: Var, bias: Var) -> Result<Var, TensorError> {
        let (r, c) = self.dims(x, OpKind::LayerNorm)?;
        for p in [gain, bias] {
            if self.dims(p, OpKind::LayerNorm)? != (1, c) {
                return Err(self.shape_err(OpKind::LayerNorm, x, p));
            }
        }
        let xv = self.value(x).values();
        let g = self.value(gain).values();
        let b = self.value(bias).values();
        let mut normed = vec![0.0; r * c];
        let mut inv_std = vec![0.0; r];
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            let row = &xv[i * c..(i + 1) * c];
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let inv = 1.0 / libm::sqrt(var + LAYERNORM_EPS);
            inv_std[i] = inv;
            for j in 0..c {
                let n = (row[j] - mean) * inv;
                normed[i * c + j] = n;
                out[i * c + j] = n * g[j] + b[j];
            }
        }
        let op = Op::LayerNorm { x, gain, bias, normed, inv_std };
        Ok(self.push(vec![r, c], out, op, &[x, gain, bias]))
    }

    /// Exact GELU, `x * Phi(x)`.
    pub fn gelu(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = t.values().iter().map(|&v| v * normal_cdf(v)).collect();
        let shape = t.shape().to_vec();
        self.push(shape, out, Op::Gelu(x), &[x])
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let t = self.value(x);
        let out = t.values().iter().map(|&v| sigmoid(v)).collect();
        let shape = t.shape().to_vec();
        self.push(shape, out, Op::Sigmoid(x), &[x])
    }

    /// Gathers rows of an embedding table.
    pub fn embed_lookup(&mut self, table: Var, ids: &[usize]) -> Result<Var, TensorError> {
        let (rows, c) = self.dims(table, OpKind::EmbedLookup)?;
        if ids.is_empty() {
            return Err(TensorError::Contract("embed_lookup: empty id sequence".into()));
        }
        if let Some(bad) = ids.iter().find(|&&id| id >= rows) {
            return Err(TensorError::Contract(format!("embed_lookup: id {bad} out of range for {rows} rows")));
        }
        let tv = self.value(table).values();
        let mut out = Vec::with_capacity(ids.len() * c);
        for &id in ids {
            out.extend_from_slice(&tv[id * c..(id + 1) * c]);
        }
        let op = Op::EmbedLookup { table, ids: ids.to_vec() };
        Ok(self.push(vec![ids.len(), c], out, op, &[table]))
    }

    /// Stacks matrices with equal column counts.
    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var, TensorError> {
        let first = *parts
            .first()
            .ok_or_else(|| TensorError::Contract("concat_rows: no inputs".into()))?;
        let (_, c) = self.dims(first, OpKind::ConcatRows)?;
        let mut rows = 0;
        let mut out = Vec::new();
        for &p in parts {
            let (r, pc) = self.dims(p, OpKind::ConcatRows)?;
            if pc != c {
                return Err(self.shape_err(OpKind::ConcatRows, first, p));
            }
            rows += r;
            out.extend_from_slice(self.value(p).values());
        }
        Ok(self.push(vec![rows, c], out, Op::ConcatRows(parts.to_vec()), parts))
    }

    /// Mean over rows, giving a `1 x c` row. With a row mask only rows
    /// marked `true` are averaged.
    pub fn mean_rows(&mut self, x: Var, mask: Option<&[bool]>) -> Result<Var, TensorError> {
        let (r, c) = self.dims(x, OpKind::MeanRows)?;
        let keep = match mask {
            Some(m) if m.len() != r => {
                return Err(TensorError::Shape {
                    op: OpKind::MeanRows,
                    left: self.value(x).shape().to_vec(),
                    right: vec![m.len()],
                })
            }
            Some(m) => m.to_vec(),
            None => vec![true; r],
        };
        let count = keep.iter().filter(|k| **k).count();
        if count == 0 {
            return Err(TensorError::Contract("mean_rows: every row is masked".into()));
        }
        let xv = self.value(x).values();
        let mut out = vec![0.0; c];
        for i in (0..r).filter(|&i| keep[i]) {
            for j in 0..c {
                out[j] += xv[i * c + j];
            }
        }
        out.iter_mut().for_each(|v| *v /= count as f64);
        Ok(self.push(vec![1, c], out, Op::MeanRows { x, keep, count }, &[x]))
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var, TensorError> {
        let (r, c) = self.dims(x, OpKind::Transpose)?;
        let out = transpose_raw(self.value(x).values(), r, c);
        Ok(self.push(vec![c, r], out, Op::Transpose(x), &[x]))
    }

    /// Columns `[head * d, (head + 1) * d)` of a `T x (heads * d)` matrix.
    pub fn slice_heads(&mut self, x: Var, head: usize, heads: usize) -> Result<Var, TensorError> {
        let (r, c) = self.dims(x, OpKind::SliceHeads)?;
        if heads == 0 || c % heads != 0 || head >= heads {
            return Err(TensorError::Shape {
                op: OpKind::SliceHeads,
                left: self.value(x).shape().to_vec(),
                right: vec![head, heads],
            });
        }
        let d = c / heads;
        let xv = self.value(x).values();
        let mut out = Vec::with_capacity(r * d);
        for i in 0..r {
            out.extend_from_slice(&xv[i * c + head * d..i * c + (head + 1) * d]);
        }
        Ok(self.push(vec![r, d], out, Op::SliceHeads { x, head, heads }, &[x]))
    }

    /// Concatenates equally shaped `T x d` head outputs along columns.
    pub fn merge_heads(&mut self, heads: &[Var]) -> Result<Var, TensorError> {
        let first = *heads
            .first()
            .ok_or_else(|| TensorError::Contract("merge_heads: no inputs".into()))?;
        let (r, d) = self.dims(first, OpKind::MergeHeads)?;
        for &h in heads {
            if self.dims(h, OpKind::MergeHeads)? != (r, d) {
                return Err(self.shape_err(OpKind::MergeHeads, first, h));
            }
        }
        let c = d * heads.len();
        let mut out = vec![0.0; r * c];
        for (k, &h) in heads.iter().enumerate() {
            let hv = self.value(h).values();
            for i in 0..r {
                out[i * c + k * d..i * c + (k + 1) * d].copy_from_slice(&hv[i * d..(i + 1) * d]);
            }
        }
        Ok(self.push(vec![r, c], out, Op::MergeHeads(heads.to_vec()), heads))
    }

    /// Sum of every element, as a scalar.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).values().iter().sum();
        self.push(vec![1], vec![s], Op::Sum(x), &[x])
    }

    /// Mean softmax cross-entropy of `B x C` logits against class indices.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var, TensorError> {
        let (b, c) = self.dims(logits, OpKind::CrossEntropy)?;
        if labels.len() != b {
            return Err(TensorError::Shape {
                op: OpKind::CrossEntropy,
                left: self.value(logits).shape().to_vec(),
                right: vec![labels.len()],
            });
        }
        if let Some(bad) = labels.iter().find(|&&l| l >= c) {
            return Err(TensorError::Contract(format!("cross_entropy: label {bad} out of range for {c} classes")));
        }
        let lv = self.value(logits).values();
        let mut probs = vec![0.0; b * c];
        let mut loss = 0.0;
        for i in 0..b {
            let row = &lv[i * c..(i + 1) * c];
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + libm::log(row.iter().map(|v| libm::exp(v - max)).sum::<f64>());
            for j in 0..c {
                probs[i * c + j] = libm::exp(row[j] - lse);
            }
            loss += lse - row[labels[i]];
        }
        let op = Op::CrossEntropy { logits, labels: labels.to_vec(), probs };
        Ok(self.push(vec![1], vec![loss / b as f64], op, &[logits]))
    }

    /// Mean binary cross-entropy of sigmoid(logits) against 0/1 targets,
    /// averaged over every element.
    pub fn bce_with_logits(&mut self, logits: Var, targets: &[f64]) -> Result<Var, TensorError> {
        let n = self.value(logits).len();
        if targets.len() != n {
            return Err(TensorError::Shape {
                op: OpKind::BceWithLogits,
                left: self.value(logits).shape().to_vec(),
                right: vec![targets.len()],
            });
        }
        let lv = self.value(logits).values();
        // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
        let loss = lv.iter().zip(targets).map(|(&z, &y)| softplus(z) - y * z).sum::<f64>() / n as f64;
        let op = Op::BceWithLogits { logits, targets: targets.to_vec() };
        Ok(self.push(vec![1], vec![loss], op, &[logits]))
    }
}

pub(crate) fn zip_map(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| f(*x, *y)).collect()
}

pub(crate) fn matmul_raw(a: &[f64], b: &[f64], r: usize, k: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        let row = &mut out[i * c..(i + 1) * c];
        for p in 0..k {
            let av = a[i * k + p];
            if av == 0.0 {
                continue;
            }
            let brow = &b[p * c..(p + 1) * c];
            for (o, bv) in row.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    out
}

pub(crate) fn transpose_raw(x: &[f64], r: usize, c: usize) -> Vec<f64> {
    let mut out = vec![0.0; r * c];
    for i in 0..r {
        for j in 0..c {
            out[j * r + i] = x[i * c + j];
        }
    }
    out
}
