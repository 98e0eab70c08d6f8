//! Reverse-mode differentiation over a linear tape of matrix operations.
//!
//! Operations append a node holding the forward value; [`Tape::backward`]
//! walks the nodes in reverse and applies each node's adjoint. Nodes whose
//! inputs are all constants are never visited on the way back.

use super::params::ParamStore;
use super::tensor::{gemm_acc, gemm_nt_acc, gemm_tn_acc, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    AddRowBroadcast(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Relu(Var),
    Concat(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SegmentSum(Var, Vec<usize>),
    MeanRows(Var),
    SumAll(Var),
    /// Stores the softmax probabilities and target classes.
    SoftmaxCrossEntropy(Var, Tensor, Vec<usize>),
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by node.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Tape {
        Tape::default()
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

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, false)
    }

    /// Leaf that requires a gradient but is not tied to a parameter store.
    pub fn variable(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant, true)
    }

    /// Leaf holding a copy of parameter `index` of `store`.
    pub fn param(&mut self, store: &ParamStore, index: usize) -> Var {
        self.push(store.value(index).clone(), Op::Param(index), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.cols() != tb.rows() {
            return Err(mismatch("matmul", ta, tb));
        }
        let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
        let mut out = Tensor::zeros(m, n);
        gemm_acc(ta.data(), tb.data(), out.data_mut(), m, k, n);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    /// `a + bias` where `bias` is `1 × cols` and is added to every row.
    pub fn add_row(&mut self, a: Var, bias: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(bias));
        if tb.rows() != 1 || tb.cols() != ta.cols() {
            return Err(mismatch("add_row", ta, tb));
        }
        let mut out = ta.clone();
        let cols = ta.cols();
        for r in 0..ta.rows() {
            for (o, b) in out.row_slice_mut(r).iter_mut().zip(tb.data()) {
                *o += b;
            }
        }
        debug_assert_eq!(out.cols(), cols);
        let rg = self.rg(a) || self.rg(bias);
        Ok(self.push(out, Op::AddRowBroadcast(a, bias), rg))
    }

    /// Elementwise sum of two same-shape tensors.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("add", ta, tb));
        }
        let mut out = ta.clone();
        out.add_assign(tb);
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Elementwise product of two same-shape tensors.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(mismatch("mul", ta, tb));
        }
        let data = ta.data().iter().zip(tb.data()).map(|(x, y)| x * y).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let ta = self.value(a);
        let data = ta.data().iter().map(|&x| x.max(0.0)).collect();
        let out = Tensor::new(ta.rows(), ta.cols(), data).expect("same shape");
        let rg = self.rg(a);
        self.push(out, Op::Relu(a), rg)
    }

    /// Concatenate along columns; all inputs must have the same row count.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::InvalidParameter("concat of zero tensors".into()))?;
        let rows = self.value(*first).rows();
        for p in parts {
            if self.value(*p).rows() != rows {
                return Err(mismatch("concat", self.value(*first), self.value(*p)));
            }
        }
        let cols: usize = parts.iter().map(|p| self.value(*p).cols()).sum();
        let mut out = Tensor::zeros(rows, cols);
        for r in 0..rows {
            let dst = out.row_slice_mut(r);
            let mut off = 0;
            for p in parts {
                let src = self.nodes[p.0].value.row_slice(r);
                dst[off..off + src.len()].copy_from_slice(src);
                off += src.len();
            }
        }
        let rg = parts.iter().any(|p| self.rg(*p));
        Ok(self.push(out, Op::Concat(parts.to_vec()), rg))
    }

    /// Row `k` of the output is row `index[k]` of `a`.
    pub fn gather_rows(&mut self, a: Var, index: &[usize]) -> Result<Var> {
        let ta = self.value(a);
        let mut out = Tensor::zeros(index.len(), ta.cols());
        for (k, &i) in index.iter().enumerate() {
            if i >= ta.rows() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: ta.rows(),
                });
            }
            out.row_slice_mut(k).copy_from_slice(ta.row_slice(i));
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::GatherRows(a, index.to_vec()), rg))
    }

    /// Row `s` of the output is the sum of the rows `r` of `a` with
    /// `segments[r] == s`, added in increasing `r`. Empty segments are zero.
    pub fn segment_sum(&mut self, a: Var, segments: &[usize], n_segments: usize) -> Result<Var> {
        let ta = self.value(a);
        if segments.len() != ta.rows() {
            return Err(Error::ShapeMismatch {
                op: "segment_sum",
                left: ta.shape(),
                right: vec![segments.len()],
            });
        }
        let mut out = Tensor::zeros(n_segments, ta.cols());
        for (r, &s) in segments.iter().enumerate() {
            if s >= n_segments {
                return Err(Error::InvalidSegment {
                    index: s,
                    segments: n_segments,
                });
            }
            for (o, v) in out.row_slice_mut(s).iter_mut().zip(ta.row_slice(r)) {
                *o += v;
            }
        }
        let rg = self.rg(a);
        Ok(self.push(out, Op::SegmentSum(a, segments.to_vec()), rg))
    }

    /// Column means, as a `1 × cols` row.
    pub fn mean_rows(&mut self, a: Var) -> Result<Var> {
        let ta = self.value(a);
        if ta.rows() == 0 {
            return Err(Error::InvalidParameter("mean of zero rows".into()));
        }
        let mut out = Tensor::zeros(1, ta.cols());
        for r in 0..ta.rows() {
            for (o, v) in out.data_mut().iter_mut().zip(ta.row_slice(r)) {
                *o += v;
            }
        }
        let n = ta.rows() as f64;
        out.data_mut().iter_mut().for_each(|x| *x /= n);
        let rg = self.rg(a);
        Ok(self.push(out, Op::MeanRows(a), rg))
    }

    pub fn sum_all(&mut self, a: Var) -> Var {
        let s = self.value(a).data().iter().sum();
        let rg = self.rg(a);
        self.push(Tensor::scalar(s), Op::SumAll(a), rg)
    }

    /// Mean softmax cross-entropy of `logits` (`batch × classes`) against
    /// integer class targets.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let tl = self.value(logits);
        if targets.len() != tl.rows() || tl.rows() == 0 {
            return Err(Error::ShapeMismatch {
                op: "softmax_cross_entropy",
                left: tl.shape(),
                right: vec![targets.len()],
            });
        }
        let k = tl.cols();
        let mut probs = Tensor::zeros(tl.rows(), k);
        let mut loss = 0.0;
        for (r, &t) in targets.iter().enumerate() {
            if t >= k {
                return Err(Error::IndexOutOfRange { index: t, len: k });
            }
            let row = tl.row_slice(r);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            let p = probs.row_slice_mut(r);
            for (pi, &x) in p.iter_mut().zip(row) {
                *pi = (x - max).exp();
                z += *pi;
            }
            p.iter_mut().for_each(|pi| *pi /= z);
            loss += z.ln() - (row[t] - max);
        }
        loss /= tl.rows() as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::scalar(loss),
            Op::SoftmaxCrossEntropy(logits, probs, targets.to_vec()),
            rg,
        ))
    }

    /// Reverse sweep from a `1 × 1` loss.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let tl = self.value(loss);
        if tl.len() != 1 {
            return Err(Error::NonScalarLoss(tl.shape()));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[idx].take() else {
                continue;
            };
            self.propagate(node, &g, &mut grads);
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], v: Var, f: impl FnOnce(&mut Tensor)) {
        if !self.rg(v) {
            return;
        }
        let slot = &mut grads[v.0];
        let t = slot.get_or_insert_with(|| {
            let val = &self.nodes[v.0].value;
            Tensor::zeros(val.rows(), val.cols())
        });
        f(t);
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                let (m, k, n) = (ta.rows(), ta.cols(), tb.cols());
                self.accumulate(grads, *a, |ga| {
                    gemm_nt_acc(g.data(), tb.data(), ga.data_mut(), m, n, k)
                });
                self.accumulate(grads, *b, |gb| {
                    gemm_tn_acc(ta.data(), g.data(), gb.data_mut(), m, k, n)
                });
            }
            Op::AddRowBroadcast(a, bias) => {
                self.accumulate(grads, *a, |ga| ga.add_assign(g));
                self.accumulate(grads, *bias, |gb| {
                    for r in 0..g.rows() {
                        for (o, v) in gb.data_mut().iter_mut().zip(g.row_slice(r)) {
                            *o += v;
                        }
                    }
                });
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, |ga| ga.add_assign(g));
                self.accumulate(grads, *b, |gb| gb.add_assign(g));
            }
            Op::Mul(a, b) => {
                let (ta, tb) = (self.value(*a), self.value(*b));
                self.accumulate(grads, *a, |ga| {
                    for ((o, gv), bv) in ga.data_mut().iter_mut().zip(g.data()).zip(tb.data()) {
                        *o += gv * bv;
                    }
                });
                self.accumulate(grads, *b, |gb| {
                    for ((o, gv), av) in gb.data_mut().iter_mut().zip(g.data()).zip(ta.data()) {
                        *o += gv * av;
                    }
                });
            }
            Op::Relu(a) => {
                let out = &node.value;
                self.accumulate(grads, *a, |ga| {
                    for ((o, gv), y) in ga.data_mut().iter_mut().zip(g.data()).zip(out.data()) {
                        if *y > 0.0 {
                            *o += gv;
                        }
                    }
                });
            }
            Op::Concat(parts) => {
                let mut off = 0;
                for p in parts {
                    let w = self.value(*p).cols();
                    self.accumulate(grads, *p, |gp| {
                        for r in 0..g.rows() {
                            let src = &g.row_slice(r)[off..off + w];
                            for (o, v) in gp.row_slice_mut(r).iter_mut().zip(src) {
                                *o += v;
                            }
                        }
                    });
                    off += w;
                }
            }
            Op::GatherRows(a, index) => {
                self.accumulate(grads, *a, |ga| {
                    for (k, &i) in index.iter().enumerate() {
                        for (o, v) in ga.row_slice_mut(i).iter_mut().zip(g.row_slice(k)) {
                            *o += v;
                        }
                    }
                });
            }
            Op::SegmentSum(a, segments) => {
                self.accumulate(grads, *a, |ga| {
                    for (r, &s) in segments.iter().enumerate() {
                        for (o, v) in ga.row_slice_mut(r).iter_mut().zip(g.row_slice(s)) {
                            *o += v;
                        }
                    }
                });
            }
            Op::MeanRows(a) => {
                let n = self.value(*a).rows() as f64;
                self.accumulate(grads, *a, |ga| {
                    for r in 0..ga.rows() {
                        for (o, v) in ga.row_slice_mut(r).iter_mut().zip(g.data()) {
                            *o += v / n;
                        }
                    }
                });
            }
            Op::SumAll(a) => {
                let gv = g.item();
                self.accumulate(grads, *a, |ga| ga.data_mut().iter_mut().for_each(|o| *o += gv));
            }
            Op::SoftmaxCrossEntropy(logits, probs, targets) => {
                let scale = g.item() / targets.len() as f64;
                self.accumulate(grads, *logits, |gl| {
                    for (r, &t) in targets.iter().enumerate() {
                        let p = probs.row_slice(r);
                        let o = gl.row_slice_mut(r);
                        for (c, (ov, pv)) in o.iter_mut().zip(p).enumerate() {
                            let y = if c == t { 1.0 } else { 0.0 };
                            *ov += scale * (pv - y);
                        }
                    }
                });
            }
        }
    }

    /// Add the gradients of all parameter leaves into `store`.
    pub fn accumulate_param_grads(&self, grads: &Gradients, store: &mut ParamStore) {
        for (i, node) in self.nodes.iter().enumerate() {
            if let Op::Param(p) = node.op {
                if let Some(g) = &grads.grads[i] {
                    store.grad_mut(p).add_assign(g);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(rows: usize, cols: usize, v: &[f64]) -> Tensor {
        Tensor::new(rows, cols, v.to_vec()).unwrap()
    }

    #[test]
    fn relu_forward() {
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 2, &[-1.0, 2.0]));
        let y = tape.relu(x);
        assert_eq!(tape.value(y).data(), &[0.0, 2.0]);
    }

    #[test]
    fn segment_sum_forward() {
        let mut tape = Tape::new();
        let x = tape.constant(t(3, 1, &[1.0, 2.0, 3.0]));
        let y = tape.segment_sum(x, &[0, 0, 1], 2).unwrap();
        assert_eq!(tape.value(y).data(), &[3.0, 3.0]);
        assert!(matches!(
            tape.segment_sum(x, &[0, 2, 1], 2),
            Err(Error::InvalidSegment {
                index: 2,
                segments: 2
            })
        ));
        let all = tape.segment_sum(x, &[0, 0, 0], 1).unwrap();
        assert_eq!(tape.value(all).data(), &[6.0]);
    }

    #[test]
    fn cross_entropy_uniform() {
        let mut tape = Tape::new();
        let x = tape.constant(t(1, 2, &[0.0, 0.0]));
        let l = tape.softmax_cross_entropy(x, &[0]).unwrap();
        assert!((tape.value(l).item() - 2f64.ln()).abs() < 1e-15);
        let x = tape.constant(t(1, 5, &[3.0; 5]));
        let l = tape.softmax_cross_entropy(x, &[4]).unwrap();
        assert!((tape.value(l).item() - 5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn square_gradient() {
        let mut tape = Tape::new();
        let x = tape.variable(t(1, 1, &[3.0]));
        let sq = tape.mul(x, x).unwrap();
        let l = tape.sum_all(sq);
        let g = tape.backward(l).unwrap();
        assert_eq!(g.get(x).unwrap().data(), &[6.0]);
    }

    #[test]
    fn errors() {
        let mut tape = Tape::new();
        let a = tape.variable(t(2, 3, &[0.0; 6]));
        let b = tape.variable(t(2, 3, &[0.0; 6]));
        let e = tape.matmul(a, b).unwrap_err();
        assert!(e.to_string().contains("[2, 3]"), "{e}");
        let m = tape.matmul(a, a);
        assert!(m.is_err());
        assert!(matches!(tape.backward(a), Err(Error::NonScalarLoss(_))));
        let c = tape.variable(t(3, 3, &[0.0; 9]));
        assert!(tape.concat(&[a, c]).is_err());
        assert!(tape.add(a, c).is_err());
    }

    #[test]
    fn constants_get_no_gradient() {
        let mut tape = Tape::new();
        let c = tape.constant(t(1, 2, &[1.0, 2.0]));
        let x = tape.variable(t(1, 2, &[3.0, 4.0]));
        let p = tape.mul(c, x).unwrap();
        let l = tape.sum_all(p);
        let g = tape.backward(l).unwrap();
        assert!(g.get(c).is_none());
        assert_eq!(g.get(x).unwrap().data(), &[1.0, 2.0]);
    }
}
