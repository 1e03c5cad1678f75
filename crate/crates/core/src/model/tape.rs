//! Minimal reverse-mode autodiff over `f64` matrices: a Wengert list whose
//! nodes are created in topological order, so one reverse sweep propagates
//! gradients. Just the operations the tagger needs, each with a closed-form
//! backward.

use ndarray::{Array1, Array2, Axis};

use super::ops::{gelu_scalar, gelu_scalar_grad, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(pub(crate) usize);

pub(crate) struct Node {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
    op: Op,
}

enum Op {
    Leaf,
    /// C = A · B
    MatMul(NodeId, NodeId),
    /// C = A · Bᵀ
    MatMulBT(NodeId, NodeId),
    Add(NodeId, NodeId),
    /// matrix + broadcast row (1×d)
    AddRow(NodeId, NodeId),
    AddConst(NodeId),
    /// elementwise product with a constant mask (dropout)
    MulConst(NodeId, Array2<f64>),
    Scale(NodeId, f64),
    Gelu(NodeId),
    LayerNorm {
        x: NodeId,
        gamma: NodeId,
        beta: NodeId,
        xhat: Array2<f64>,
        inv_std: Array1<f64>,
    },
    /// rowwise softmax of (x + mask), mask entries 0 or -inf
    MaskedSoftmax {
        x: NodeId,
    },
    /// rowwise p_i ∝ exp(ẑ_i)·sigmoid(ẑ_i) with ẑ = z - rowmax(z)
    Sigsoftmax {
        x: NodeId,
        sig: Array2<f64>,
        argmax: Vec<usize>,
    },
    /// rows of `table` selected by index
    Gather {
        table: NodeId,
        indices: Vec<usize>,
    },
    /// scalar KL(q ‖ p) summed over rows weighted by `row_weight`, / norm
    KlLoss {
        p: NodeId,
        q: Array2<f64>,
        row_weight: Vec<f64>,
        norm: f64,
    },
    /// scalar Σ wᵢ·xᵢ over scalar nodes
    SumWeighted(Vec<(NodeId, f64)>),
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Tape {
        Tape { nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        let grad = Array2::zeros(value.raw_dim());
        self.nodes.push(Node { value, grad, op });
        NodeId(self.nodes.len() - 1)
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].value
    }

    pub fn grad(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id.0].grad
    }

    pub fn scalar(&self, id: NodeId) -> f64 {
        self.nodes[id.0].value[[0, 0]]
    }

    pub fn leaf(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Leaf)
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value);
        self.push(value, Op::MatMul(a, b))
    }

    pub fn matmul_bt(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.dot(&self.nodes[b.0].value.t());
        self.push(value, Op::MatMulBT(a, b))
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let value = &self.nodes[a.0].value + &self.nodes[b.0].value;
        self.push(value, Op::Add(a, b))
    }

    pub fn add_row(&mut self, a: NodeId, row: NodeId) -> NodeId {
        let value = &self.nodes[a.0].value + &self.nodes[row.0].value.row(0);
        self.push(value, Op::AddRow(a, row))
    }

    pub fn add_const(&mut self, a: NodeId, c: &Array2<f64>) -> NodeId {
        let value = &self.nodes[a.0].value + c;
        self.push(value, Op::AddConst(a))
    }

    pub fn mul_const(&mut self, a: NodeId, mask: Array2<f64>) -> NodeId {
        let value = &self.nodes[a.0].value * &mask;
        self.push(value, Op::MulConst(a, mask))
    }

    pub fn scale(&mut self, a: NodeId, s: f64) -> NodeId {
        let value = &self.nodes[a.0].value * s;
        self.push(value, Op::Scale(a, s))
    }

    pub fn gelu(&mut self, a: NodeId) -> NodeId {
        let value = self.nodes[a.0].value.mapv(gelu_scalar);
        self.push(value, Op::Gelu(a))
    }

    pub fn layer_norm(&mut self, x: NodeId, gamma: NodeId, beta: NodeId) -> NodeId {
        const EPS: f64 = 1e-5;
        let xv = &self.nodes[x.0].value;
        let d = xv.ncols() as f64;
        let mean = xv.mean_axis(Axis(1)).expect("non-empty rows");
        let mut xhat = xv.clone();
        for (mut row, m) in xhat.rows_mut().into_iter().zip(mean.iter()) {
            row.mapv_inplace(|v| v - m);
        }
        let var = xhat.mapv(|v| v * v).sum_axis(Axis(1)) / d;
        let inv_std = var.mapv(|v| 1.0 / (v + EPS).sqrt());
        for (mut row, s) in xhat.rows_mut().into_iter().zip(inv_std.iter()) {
            row.mapv_inplace(|v| v * s);
        }
        let g = self.nodes[gamma.0].value.row(0).to_owned();
        let b = self.nodes[beta.0].value.row(0).to_owned();
        let mut value = xhat.clone();
        for mut row in value.rows_mut() {
            row.zip_mut_with(&g, |v, gv| *v *= gv);
            row.zip_mut_with(&b, |v, bv| *v += bv);
        }
        self.push(
            value,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                xhat,
                inv_std,
            },
        )
    }

    /// Rowwise softmax of (x + mask); every row must keep at least one
    /// finite entry. Masked positions get exactly zero weight.
    pub fn masked_softmax(&mut self, x: NodeId, mask: &Array2<f64>) -> NodeId {
        let z = &self.nodes[x.0].value + mask;
        let mut value = z;
        for mut row in value.rows_mut() {
            let m = row.fold(f64::NEG_INFINITY, |acc, v| acc.max(*v));
            row.mapv_inplace(|v| (v - m).exp());
            let s = row.sum();
            row.mapv_inplace(|v| v / s);
        }
        self.push(value, Op::MaskedSoftmax { x })
    }

    /// Shift-invariant sigsoftmax: the formula is applied to max-subtracted
    /// logits, which stabilizes it and makes constant shifts exact no-ops.
    pub fn sigsoftmax(&mut self, x: NodeId) -> NodeId {
        let mut value = self.nodes[x.0].value.clone();
        let mut sig = Array2::zeros(value.raw_dim());
        let mut argmax = Vec::with_capacity(value.nrows());
        for (mut row, mut sig_row) in value.rows_mut().into_iter().zip(sig.rows_mut()) {
            let (mut best, mut best_v) = (0usize, f64::NEG_INFINITY);
            for (j, v) in row.iter().enumerate() {
                if *v > best_v {
                    best = j;
                    best_v = *v;
                }
            }
            argmax.push(best);
            let mut sum = 0.0;
            for (v, s) in row.iter_mut().zip(sig_row.iter_mut()) {
                let zhat = *v - best_v;
                *s = sigmoid(zhat);
                *v = zhat.exp() * *s;
                sum += *v;
            }
            for v in row.iter_mut() {
                *v /= sum;
            }
        }
        self.push(value, Op::Sigsoftmax { x, sig, argmax })
    }

    pub fn gather(&mut self, table: NodeId, indices: &[usize]) -> NodeId {
        let t = &self.nodes[table.0].value;
        let mut value = Array2::zeros((indices.len(), t.ncols()));
        for (r, &idx) in indices.iter().enumerate() {
            value.row_mut(r).assign(&t.row(idx));
        }
        self.push(
            value,
            Op::Gather {
                table,
                indices: indices.to_vec(),
            },
        )
    }

    /// KL divergence from the constant target rows `q` to the predicted
    /// rows `p`, summing rows weighted by `row_weight`, divided by `norm`.
    pub fn kl_loss(&mut self, p: NodeId, q: Array2<f64>, row_weight: Vec<f64>, norm: f64) -> NodeId {
        let pv = &self.nodes[p.0].value;
        let mut total = 0.0;
        for ((p_row, q_row), w) in pv.rows().into_iter().zip(q.rows()).zip(&row_weight) {
            if *w == 0.0 {
                continue;
            }
            let mut kl = 0.0;
            for (pi, qi) in p_row.iter().zip(q_row.iter()) {
                if *qi > 0.0 {
                    kl += qi * (qi.ln() - pi.ln());
                }
            }
            total += w * kl;
        }
        let value = Array2::from_elem((1, 1), total / norm);
        self.push(
            value,
            Op::KlLoss {
                p,
                q,
                row_weight,
                norm,
            },
        )
    }

    pub fn sum_weighted(&mut self, terms: Vec<(NodeId, f64)>) -> NodeId {
        let total: f64 = terms
            .iter()
            .map(|(id, w)| self.nodes[id.0].value[[0, 0]] * w)
            .sum();
        self.push(Array2::from_elem((1, 1), total), Op::SumWeighted(terms))
    }

    /// Reverse sweep seeding d(loss)/d(loss) = 1.
    pub fn backward(&mut self, loss: NodeId) {
        self.nodes[loss.0].grad.fill(1.0);
        for i in (0..=loss.0).rev() {
            let (before, after) = self.nodes.split_at_mut(i);
            let node = &after[0];
            match &node.op {
                Op::Leaf => {}
                Op::MatMul(a, b) => {
                    let (ga, gb) = {
                        let av = &before[a.0].value;
                        let bv = &before[b.0].value;
                        (node.grad.dot(&bv.t()), av.t().dot(&node.grad))
                    };
                    before[a.0].grad += &ga;
                    before[b.0].grad += &gb;
                }
                Op::MatMulBT(a, b) => {
                    let (ga, gb) = {
                        let av = &before[a.0].value;
                        let bv = &before[b.0].value;
                        (node.grad.dot(bv), node.grad.t().dot(av))
                    };
                    before[a.0].grad += &ga;
                    before[b.0].grad += &gb;
                }
                Op::Add(a, b) => {
                    before[a.0].grad += &node.grad;
                    before[b.0].grad += &node.grad;
                }
                Op::AddRow(a, row) => {
                    before[a.0].grad += &node.grad;
                    let col_sum = node.grad.sum_axis(Axis(0));
                    before[row.0].grad.row_mut(0).zip_mut_with(&col_sum, |g, s| *g += s);
                }
                Op::AddConst(a) => {
                    before[a.0].grad += &node.grad;
                }
                Op::MulConst(a, mask) => {
                    before[a.0].grad += &(&node.grad * mask);
                }
                Op::Scale(a, s) => {
                    before[a.0].grad.scaled_add(*s, &node.grad);
                }
                Op::Gelu(a) => {
                    let ga = {
                        let av = &before[a.0].value;
                        let mut g = node.grad.clone();
                        g.zip_mut_with(av, |gv, x| *gv *= gelu_scalar_grad(*x));
                        g
                    };
                    before[a.0].grad += &ga;
                }
                Op::LayerNorm {
                    x,
                    gamma,
                    beta,
                    xhat,
                    inv_std,
                } => {
                    let d = xhat.ncols() as f64;
                    let gamma_row = before[gamma.0].value.row(0).to_owned();
                    // parameter gradients
                    let dgamma = (&node.grad * xhat).sum_axis(Axis(0));
                    let dbeta = node.grad.sum_axis(Axis(0));
                    before[gamma.0]
                        .grad
                        .row_mut(0)
                        .zip_mut_with(&dgamma, |g, v| *g += v);
                    before[beta.0]
                        .grad
                        .row_mut(0)
                        .zip_mut_with(&dbeta, |g, v| *g += v);
                    // input gradient, rowwise
                    let mut dx = Array2::zeros(xhat.raw_dim());
                    for (r, g_row) in node.grad.rows().into_iter().enumerate() {
                        let xhat_row = xhat.row(r);
                        let dxhat: Array1<f64> = g_row
                            .iter()
                            .zip(gamma_row.iter())
                            .map(|(g, gm)| g * gm)
                            .collect();
                        let mean_dxhat = dxhat.sum() / d;
                        let mean_dxhat_xhat =
                            dxhat.iter().zip(xhat_row.iter()).map(|(a, b)| a * b).sum::<f64>() / d;
                        let s = inv_std[r];
                        for (j, dst) in dx.row_mut(r).iter_mut().enumerate() {
                            *dst = s * (dxhat[j] - mean_dxhat - xhat_row[j] * mean_dxhat_xhat);
                        }
                    }
                    before[x.0].grad += &dx;
                }
                Op::MaskedSoftmax { x } => {
                    let p = &node.value;
                    let mut dz = node.grad.clone();
                    for (mut dz_row, p_row) in dz.rows_mut().into_iter().zip(p.rows()) {
                        let dot: f64 = dz_row.iter().zip(p_row.iter()).map(|(a, b)| a * b).sum();
                        for (g, pv) in dz_row.iter_mut().zip(p_row.iter()) {
                            *g = pv * (*g - dot);
                        }
                    }
                    before[x.0].grad += &dz;
                }
                Op::Sigsoftmax { x, sig, argmax } => {
                    let p = &node.value;
                    let mut dz = node.grad.clone();
                    for (r, (mut dz_row, p_row)) in
                        dz.rows_mut().into_iter().zip(p.rows()).enumerate()
                    {
                        let c: f64 = dz_row.iter().zip(p_row.iter()).map(|(a, b)| a * b).sum();
                        let mut total = 0.0;
                        for (j, (g, pv)) in dz_row.iter_mut().zip(p_row.iter()).enumerate() {
                            *g = pv * (2.0 - sig[[r, j]]) * (*g - c);
                            total += *g;
                        }
                        // the row max is itself one of the inputs: shifting
                        // all logits must leave the output unchanged
                        dz_row[argmax[r]] -= total;
                    }
                    before[x.0].grad += &dz;
                }
                Op::Gather { table, indices } => {
                    for (r, &idx) in indices.iter().enumerate() {
                        let g_row = node.grad.row(r).to_owned();
                        before[table.0]
                            .grad
                            .row_mut(idx)
                            .zip_mut_with(&g_row, |g, v| *g += v);
                    }
                }
                Op::KlLoss {
                    p,
                    q,
                    row_weight,
                    norm,
                } => {
                    let g = node.grad[[0, 0]];
                    let mut dp = Array2::zeros(q.raw_dim());
                    {
                        let pv = &before[p.0].value;
                        for (r, w) in row_weight.iter().enumerate() {
                            if *w == 0.0 {
                                continue;
                            }
                            for j in 0..q.ncols() {
                                let qv = q[[r, j]];
                                if qv > 0.0 {
                                    dp[[r, j]] = -g * w * qv / (pv[[r, j]] * norm);
                                }
                            }
                        }
                    }
                    before[p.0].grad += &dp;
                }
                Op::SumWeighted(terms) => {
                    let g = node.grad[[0, 0]];
                    for (id, w) in terms {
                        before[id.0].grad[[0, 0]] += g * w;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    /// Central finite differences against the tape for a composite graph.
    #[test]
    fn finite_difference_spot_check() {
        let a0 = array![[0.3, -0.7], [1.2, 0.4]];
        let b0 = array![[0.5, 0.1], [-0.3, 0.9]];
        let loss_of = |a: &Array2<f64>, b: &Array2<f64>| -> f64 {
            let mut t = Tape::new();
            let na = t.leaf(a.clone());
            let nb = t.leaf(b.clone());
            let mm = t.matmul(na, nb);
            let ge = t.gelu(mm);
            let sm = t.sigsoftmax(ge);
            let q = array![[0.7, 0.3], [0.2, 0.8]];
            let l = t.kl_loss(sm, q, vec![1.0, 1.0], 2.0);
            t.scalar(l)
        };
        let mut t = Tape::new();
        let na = t.leaf(a0.clone());
        let nb = t.leaf(b0.clone());
        let mm = t.matmul(na, nb);
        let ge = t.gelu(mm);
        let sm = t.sigsoftmax(ge);
        let q = array![[0.7, 0.3], [0.2, 0.8]];
        let l = t.kl_loss(sm, q, vec![1.0, 1.0], 2.0);
        t.backward(l);

        let h = 1e-6;
        for (r, c) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let mut ap = a0.clone();
            let mut am = a0.clone();
            ap[[r, c]] += h;
            am[[r, c]] -= h;
            let fd = (loss_of(&ap, &b0) - loss_of(&am, &b0)) / (2.0 * h);
            let an = t.grad(na)[[r, c]];
            assert!(
                (fd - an).abs() <= 1e-6 * fd.abs().max(an.abs()).max(1.0),
                "a[{r},{c}]: fd={fd} analytic={an}"
            );
            let mut bp = b0.clone();
            let mut bm = b0.clone();
            bp[[r, c]] += h;
            bm[[r, c]] -= h;
            let fd = (loss_of(&a0, &bp) - loss_of(&a0, &bm)) / (2.0 * h);
            let an = t.grad(nb)[[r, c]];
            assert!(
                (fd - an).abs() <= 1e-6 * fd.abs().max(an.abs()).max(1.0),
                "b[{r},{c}]: fd={fd} analytic={an}"
            );
        }
    }

    #[test]
    fn layer_norm_backward_matches_fd() {
        let x0 = array![[0.3, -0.7, 1.1], [0.2, 0.9, -0.4]];
        let g0 = array![[1.1, 0.9, 1.3]];
        let b0 = array![[0.1, -0.2, 0.05]];
        let loss_of = |x: &Array2<f64>, g: &Array2<f64>, b: &Array2<f64>| -> f64 {
            let mut t = Tape::new();
            let nx = t.leaf(x.clone());
            let ng = t.leaf(g.clone());
            let nb = t.leaf(b.clone());
            let ln = t.layer_norm(nx, ng, nb);
            let sm = t.sigsoftmax(ln);
            let q = array![[0.5, 0.25, 0.25], [0.1, 0.6, 0.3]];
            let l = t.kl_loss(sm, q, vec![1.0, 1.0], 2.0);
            t.scalar(l)
        };
        let mut t = Tape::new();
        let nx = t.leaf(x0.clone());
        let ng = t.leaf(g0.clone());
        let nb = t.leaf(b0.clone());
        let ln = t.layer_norm(nx, ng, nb);
        let sm = t.sigsoftmax(ln);
        let q = array![[0.5, 0.25, 0.25], [0.1, 0.6, 0.3]];
        let l = t.kl_loss(sm, q, vec![1.0, 1.0], 2.0);
        t.backward(l);
        let h = 1e-6;
        for (node, base) in [(nx, &x0), (ng, &g0), (nb, &b0)] {
            for r in 0..base.nrows() {
                for c in 0..base.ncols() {
                    let mut p = base.clone();
                    let mut m = base.clone();
                    p[[r, c]] += h;
                    m[[r, c]] -= h;
                    let (fp, fm) = if node == nx {
                        (loss_of(&p, &g0, &b0), loss_of(&m, &g0, &b0))
                    } else if node == ng {
                        (loss_of(&x0, &p, &b0), loss_of(&x0, &m, &b0))
                    } else {
                        (loss_of(&x0, &g0, &p), loss_of(&x0, &g0, &m))
                    };
                    let fd = (fp - fm) / (2.0 * h);
                    let an = t.grad(node)[[r, c]];
                    assert!(
                        (fd - an).abs() <= 1e-6 * fd.abs().max(an.abs()).max(1.0),
                        "[{r},{c}]: fd={fd} analytic={an}"
                    );
                }
            }
        }
    }

    #[test]
    fn masked_softmax_zeroes_masked_columns() {
        let mut t = Tape::new();
        let x = t.leaf(array![[1.0, 2.0, 3.0]]);
        let mask = array![[0.0, f64::NEG_INFINITY, 0.0]];
        let p = t.masked_softmax(x, &mask);
        assert_eq!(t.value(p)[[0, 1]], 0.0);
        let row_sum: f64 = t.value(p).row(0).sum();
        assert!((row_sum - 1.0).abs() < 1e-12);
    }
}
