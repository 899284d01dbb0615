use alloc::vec;
use alloc::vec::Vec;

use super::graph::{matmul_raw, normal_cdf, normal_pdf, sigmoid, transpose_raw, Graph, Op, Var};
use super::TensorError;

impl Graph {
    /// Back-propagates from a scalar `loss`, adding d(loss)/d(leaf) into the
    /// gradient slot of every leaf that requires it. Calling this twice
    /// without [`Graph::zero_grad`] accumulates.
    pub fn backward(&mut self, loss: Var) -> Result<(), TensorError> {
        if self.value(loss).len() != 1 {
            return Err(TensorError::Contract(alloc::format!(
                "backward: loss must be scalar, got shape {:?}",
                self.value(loss).shape()
            )));
        }
        let n = loss.0 + 1;
        let mut adj: Vec<Option<Vec<f64>>> = (0..n).map(|_| None).collect();
        adj[loss.0] = Some(vec![1.0]);

        for idx in (0..n).rev() {
            let Some(up) = adj[idx].take() else { continue };
            let node = &self.nodes[idx];
            if !node.tensor.requires_grad() {
                continue;
            }
            if let Op::Leaf = node.op {
                adj[idx] = Some(up);
                continue;
            }
            self.propagate(idx, &up, &mut adj);
        }

        for (idx, g) in adj.into_iter().enumerate() {
            if let Some(g) = g {
                let node = &mut self.nodes[idx];
                if matches!(node.op, Op::Leaf) && node.tensor.requires_grad() {
                    node.tensor.accumulate_grad(&g);
                }
            }
        }
        Ok(())
    }

    fn wants(&self, v: Var) -> bool {
        self.nodes[v.0].tensor.requires_grad()
    }

    fn propagate(&self, idx: usize, up: &[f64], adj: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[idx];
        let out = node.tensor.values();
        let add = |adj: &mut [Option<Vec<f64>>], v: Var, delta: Vec<f64>| {
            if !self.wants(v) {
                return;
            }
            match &mut adj[v.0] {
                Some(acc) => acc.iter_mut().zip(&delta).for_each(|(a, d)| *a += d),
                slot @ None => *slot = Some(delta),
            }
        };
        let dims = |v: Var| self.value(v).dims().expect("validated in forward");

        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (r, k) = dims(*a);
                let (_, c) = dims(*b);
                if self.wants(*a) {
                    let bt = transpose_raw(self.value(*b).values(), k, c);
                    add(adj, *a, matmul_raw(up, &bt, r, c, k));
                }
                if self.wants(*b) {
                    let at = transpose_raw(self.value(*a).values(), r, k);
                    add(adj, *b, matmul_raw(&at, up, k, r, c));
                }
            }
            Op::Add(a, b) => {
                add(adj, *a, up.to_vec());
                add(adj, *b, up.to_vec());
            }
            Op::AddRow(x, bias) => {
                add(adj, *x, up.to_vec());
                let (_, c) = dims(*x);
                let mut db = vec![0.0; c];
                for (i, g) in up.iter().enumerate() {
                    db[i % c] += g;
                }
                add(adj, *bias, db);
            }
            Op::Mul(a, b) => {
                let av = self.value(*a).values();
                let bv = self.value(*b).values();
                add(adj, *a, up.iter().zip(bv).map(|(g, y)| g * y).collect());
                add(adj, *b, up.iter().zip(av).map(|(g, x)| g * x).collect());
            }
            Op::Scale(x, s) => add(adj, *x, up.iter().map(|g| g * s).collect()),
            Op::SoftmaxRows { x, .. } => {
                let (r, c) = dims(*x);
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    let y = &out[i * c..(i + 1) * c];
                    let g = &up[i * c..(i + 1) * c];
                    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
                    for j in 0..c {
                        dx[i * c + j] = y[j] * (g[j] - dot);
                    }
                }
                add(adj, *x, dx);
            }
            Op::LayerNorm { x, gain, bias, normed, inv_std } => {
                let (r, c) = dims(*x);
                let gv = self.value(*gain).values();
                let mut dx = vec![0.0; r * c];
                let mut dg = vec![0.0; c];
                let mut db = vec![0.0; c];
                for i in 0..r {
                    let n = &normed[i * c..(i + 1) * c];
                    let g = &up[i * c..(i + 1) * c];
                    let mut sum_d = 0.0;
                    let mut sum_dn = 0.0;
                    for j in 0..c {
                        let d = g[j] * gv[j];
                        sum_d += d;
                        sum_dn += d * n[j];
                        dg[j] += g[j] * n[j];
                        db[j] += g[j];
                    }
                    let scale = inv_std[i] / c as f64;
                    for j in 0..c {
                        let d = g[j] * gv[j];
                        dx[i * c + j] = scale * (c as f64 * d - sum_d - n[j] * sum_dn);
                    }
                }
                add(adj, *x, dx);
                add(adj, *gain, dg);
                add(adj, *bias, db);
            }
            Op::Gelu(x) => {
                let xv = self.value(*x).values();
                let dx = up.iter().zip(xv).map(|(g, &v)| g * (normal_cdf(v) + v * normal_pdf(v))).collect();
                add(adj, *x, dx);
            }
            Op::Sigmoid(x) => {
                let dx = up.iter().zip(out).map(|(g, y)| g * y * (1.0 - y)).collect();
                add(adj, *x, dx);
            }
            Op::EmbedLookup { table, ids } => {
                let (_, c) = dims(*table);
                let mut dt = vec![0.0; self.value(*table).len()];
                for (pos, &id) in ids.iter().enumerate() {
                    for j in 0..c {
                        dt[id * c + j] += up[pos * c + j];
                    }
                }
                add(adj, *table, dt);
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let len = self.value(p).len();
                    add(adj, p, up[offset..offset + len].to_vec());
                    offset += len;
                }
            }
            Op::MeanRows { x, keep, count } => {
                let (r, c) = dims(*x);
                let mut dx = vec![0.0; r * c];
                for i in (0..r).filter(|&i| keep[i]) {
                    for j in 0..c {
                        dx[i * c + j] = up[j] / *count as f64;
                    }
                }
                add(adj, *x, dx);
            }
            Op::Transpose(x) => {
                let (r, c) = dims(*x);
                add(adj, *x, transpose_raw(up, c, r));
            }
            Op::SliceHeads { x, head, heads } => {
                let (r, c) = dims(*x);
                let d = c / heads;
                let mut dx = vec![0.0; r * c];
                for i in 0..r {
                    dx[i * c + head * d..i * c + (head + 1) * d].copy_from_slice(&up[i * d..(i + 1) * d]);
                }
                add(adj, *x, dx);
            }
            Op::MergeHeads(parts) => {
                let (r, d) = dims(parts[0]);
                let c = d * parts.len();
                for (k, &h) in parts.iter().enumerate() {
                    let mut dh = Vec::with_capacity(r * d);
                    for i in 0..r {
                        dh.extend_from_slice(&up[i * c + k * d..i * c + (k + 1) * d]);
                    }
                    add(adj, h, dh);
                }
            }
            Op::Sum(x) => add(adj, *x, vec![up[0]; self.value(*x).len()]),
            Op::CrossEntropy { logits, labels, probs } => {
                let (b, c) = dims(*logits);
                let scale = up[0] / b as f64;
                let mut dz: Vec<f64> = probs.iter().map(|p| p * scale).collect();
                for (i, &l) in labels.iter().enumerate() {
                    dz[i * c + l] -= scale;
                }
                add(adj, *logits, dz);
            }
            Op::BceWithLogits { logits, targets } => {
                let zv = self.value(*logits).values();
                let scale = up[0] / zv.len() as f64;
                let dz = zv.iter().zip(targets).map(|(&z, &y)| (sigmoid(z) - y) * scale).collect();
                add(adj, *logits, dz);
            }
        }
    }
}
