use std::rc::Rc;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};
use crate::graphs::{clamp_score, SCORE_CLAMP};
use crate::model::prior::{edge_nll_and_grad, MixtureShape};
use crate::vectorize::point_hat_and_grad;

pub type Tensor = Array2<f64>;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulScalarVar(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    MatMul(Var, Var),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Log(Var),
    Abs(Var),
    Powi(Var, i32),
    Sum(Var),
    MeanRows(Var),
    SegmentSum { x: Var, segments: Rc<[usize]> },
    Softmax(Var),
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    MaxPairs { x: Var, winners: Vec<usize> },
    ClampMin { x: Var, floor: f64 },
    GatherPairs { x: Var, index: Rc<[(usize, usize)]> },
    EdgeAggregate { h: Var, weights: Var, edges: Rc<[(usize, usize)]> },
    Logit(Var),
    CrossEntropy { logits: Var, labels: Rc<[usize]> },
    RationalHat { points: Var, segments: Rc<[usize]>, centers: Var, radii: Var },
    MixtureNll { scores: Var, r1: Var, r2: Var, shape: MixtureShape },
}

#[derive(Clone, Debug)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation so that adjoints can be propagated back
/// through it. Every operation with a discrete choice (ReLU masks, argmax
/// picks, clamps, persistence pairings) folds that choice into a branch
/// signature; two evaluations with equal signatures lie on the same smooth
/// piece of the function.
#[derive(Clone, Debug)]
pub struct Tape {
    nodes: Vec<Node>,
    branch: u64,
    grads: Option<Vec<Option<Tensor>>>,
}

impl Default for Tape {
    fn default() -> Self {
        Self::new()
    }
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn scalar(v: f64) -> Tensor {
    Array2::from_elem((1, 1), v)
}

impl Tape {
    pub fn new() -> Self {
        Self { nodes: Vec::new(), branch: FNV_OFFSET, grads: None }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn branch_signature(&self) -> u64 {
        self.branch
    }

    /// Folds a discrete choice made outside the tape into the branch signature.
    pub fn note_branch(&mut self, choice: u64) {
        self.mark(choice);
    }

    fn mark(&mut self, choice: u64) {
        self.branch = (self.branch ^ choice).wrapping_mul(FNV_PRIME);
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.grads = None;
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Value of a 1x1 node.
    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[[0, 0]]
    }

    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn scalar_leaf(&mut self, value: f64) -> Var {
        self.leaf(scalar(value))
    }

    /// Column vector leaf.
    pub fn column(&mut self, values: &[f64]) -> Var {
        self.leaf(Array2::from_shape_vec((values.len(), 1), values.to_vec()).expect("column shape"))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        self.push(value, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) - self.value(b);
        self.push(value, Op::Sub(a, b))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        self.push(value, Op::Mul(a, b))
    }

    /// Adds a `1 x c` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let value = self.value(a) + self.value(row);
        self.push(value, Op::AddRow(a, row))
    }

    /// Multiplies `a` by the 1x1 node `s`.
    pub fn mul_scalar_var(&mut self, a: Var, s: Var) -> Var {
        let value = self.value(a) * self.scalar(s);
        self.push(value, Op::MulScalarVar(a, s))
    }

    pub fn scale(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) * k;
        self.push(value, Op::Scale(a, k))
    }

    pub fn add_const(&mut self, a: Var, k: f64) -> Var {
        let value = self.value(a) + k;
        self.push(value, Op::AddConst(a))
    }

    /// `k - a`
    pub fn rsub_const(&mut self, k: f64, a: Var) -> Var {
        let neg = self.scale(a, -1.0);
        self.add_const(neg, k)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        self.push(value, Op::MatMul(a, b))
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(|x| x.max(0.0));
        let mut h = 0u64;
        for (i, &x) in self.value(a).iter().enumerate() {
            if x > 0.0 {
                h = h.wrapping_mul(31).wrapping_add(i as u64 + 1);
            }
        }
        self.mark(h);
        self.push(value, Op::Relu(a))
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(crate::graphs::sigmoid);
        self.push(value, Op::Sigmoid(a))
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::exp);
        self.push(value, Op::Exp(a))
    }

    pub fn log(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::ln);
        self.push(value, Op::Log(a))
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(f64::abs);
        let mut h = 0u64;
        for &x in self.value(a) {
            h = h.wrapping_mul(3).wrapping_add(if x > 0.0 { 1 } else if x < 0.0 { 2 } else { 0 });
        }
        self.mark(h);
        self.push(value, Op::Abs(a))
    }

    pub fn powi(&mut self, a: Var, n: i32) -> Var {
        let value = self.value(a).mapv(|x| x.powi(n));
        self.push(value, Op::Powi(a, n))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let value = scalar(self.value(a).sum());
        self.push(value, Op::Sum(a))
    }

    /// Column-wise mean, `n x c -> 1 x c`.
    pub fn mean_rows(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let n = x.nrows().max(1) as f64;
        let value = x.sum_axis(Axis(0)).insert_axis(Axis(0)) / n;
        self.push(value, Op::MeanRows(a))
    }

    /// Sums rows into `num_segments` buckets, row `i` going to `segments[i]`.
    pub fn segment_sum(&mut self, a: Var, segments: Rc<[usize]>, num_segments: usize) -> Var {
        let x = self.value(a);
        let mut value = Array2::zeros((num_segments, x.ncols()));
        for (i, row) in x.outer_iter().enumerate() {
            let mut out = value.row_mut(segments[i]);
            out += &row;
        }
        self.push(value, Op::SegmentSum { x: a, segments })
    }

    /// Row-wise softmax.
    pub fn softmax(&mut self, a: Var) -> Var {
        let mut value = self.value(a).clone();
        for mut row in value.outer_iter_mut() {
            let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
            row.mapv_inplace(|x| (x - max).exp());
            let total = row.sum();
            row /= total;
        }
        self.push(value, Op::Softmax(a))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat_cols: row counts differ");
        self.push(value, Op::ConcatCols(parts.to_vec()))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|&p| self.value(p).view()).collect();
        let value = ndarray::concatenate(Axis(0), &views).expect("concat_rows: column counts differ");
        self.push(value, Op::ConcatRows(parts.to_vec()))
    }

    /// `out[e] = max(x[u], x[v])` for a column vector `x`; ties resolve to
    /// the smaller index.
    pub fn max_pairs(&mut self, x: Var, pairs: &[(usize, usize)]) -> Var {
        let xs = self.value(x);
        let winners: Vec<usize> = pairs
            .iter()
            .map(|&(u, v)| {
                let (lo, hi) = if u < v { (u, v) } else { (v, u) };
                if xs[[hi, 0]] > xs[[lo, 0]] {
                    hi
                } else {
                    lo
                }
            })
            .collect();
        let value = Array2::from_shape_fn((pairs.len(), 1), |(e, _)| xs[[winners[e], 0]]);
        let mut h = 0u64;
        for &w in &winners {
            h = h.wrapping_mul(1_000_003).wrapping_add(w as u64);
        }
        self.mark(h);
        self.push(value, Op::MaxPairs { x, winners })
    }

    /// `max(x, floor)` elementwise; the gradient passes only where `x > floor`.
    pub fn clamp_min(&mut self, x: Var, floor: f64) -> Var {
        let value = self.value(x).mapv(|v| v.max(floor));
        let mut h = 0u64;
        for (i, &v) in self.value(x).iter().enumerate() {
            if v > floor {
                h = h.wrapping_mul(31).wrapping_add(i as u64 + 1);
            }
        }
        self.mark(h);
        self.push(value, Op::ClampMin { x, floor })
    }

    /// Builds an `m x 2` matrix whose row `i` is `(x[a_i], x[b_i])`.
    pub fn gather_pairs(&mut self, x: Var, index: Rc<[(usize, usize)]>) -> Var {
        let xs = self.value(x);
        let value = Array2::from_shape_fn((index.len(), 2), |(i, j)| {
            let k = if j == 0 { index[i].0 } else { index[i].1 };
            xs[[k, 0]]
        });
        let mut h = 0u64;
        for &(a, b) in index.iter() {
            h = h.wrapping_mul(1_000_003).wrapping_add((a as u64) << 20 ^ b as u64);
        }
        self.mark(h);
        self.push(value, Op::GatherPairs { x, index })
    }

    /// Weighted neighbour sum over undirected edges:
    /// `out[v] = sum over edges e = {u, v} of w[e] * h[u]`.
    pub fn edge_aggregate(&mut self, h: Var, weights: Var, edges: Rc<[(usize, usize)]>) -> Var {
        let hv = self.value(h);
        let w = self.value(weights);
        let mut value = Array2::zeros(hv.raw_dim());
        for (e, &(u, v)) in edges.iter().enumerate() {
            let we = w[[e, 0]];
            value.row_mut(v).scaled_add(we, &hv.row(u));
            value.row_mut(u).scaled_add(we, &hv.row(v));
        }
        self.push(value, Op::EdgeAggregate { h, weights, edges })
    }

    /// `ln(s / (1 - s))` after clamping `s` into the open unit interval.
    pub fn logit(&mut self, a: Var) -> Var {
        let value = self.value(a).mapv(crate::graphs::logit);
        let mut h = 0u64;
        for &x in self.value(a) {
            let clamped = !(SCORE_CLAMP..=1.0 - SCORE_CLAMP).contains(&x);
            h = h.wrapping_mul(3).wrapping_add(clamped as u64);
        }
        self.mark(h);
        self.push(value, Op::Logit(a))
    }

    /// Mean softmax cross-entropy of `B x C` logits.
    pub fn cross_entropy(&mut self, logits: Var, labels: Rc<[usize]>) -> Var {
        let x = self.value(logits);
        let mut total = 0.0;
        for (row, &label) in x.outer_iter().zip(labels.iter()) {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
            total += lse - row[label];
        }
        let value = scalar(total / x.nrows().max(1) as f64);
        self.push(value, Op::CrossEntropy { logits, labels })
    }

    /// Rational hat structure elements summed per diagram: `points` is
    /// `m x 2`, `segments[i]` the diagram of point `i`, `centers` `k x 2`,
    /// `radii` `k x 1`. Output is `num_segments x k`.
    pub fn rational_hat(
        &mut self,
        points: Var,
        segments: Rc<[usize]>,
        num_segments: usize,
        centers: Var,
        radii: Var,
    ) -> Var {
        let (p, c, r) = (self.value(points), self.value(centers), self.value(radii));
        let k = c.nrows();
        let mut value = Array2::zeros((num_segments, k));
        let mut h = 0u64;
        for (i, row) in p.outer_iter().enumerate() {
            for j in 0..k {
                let (v, g) = point_hat_and_grad([row[0], row[1]], [c[[j, 0]], c[[j, 1]]], r[[j, 0]]);
                value[[segments[i], j]] += v;
                h = h.wrapping_mul(5).wrapping_add(g.branch as u64);
            }
        }
        self.mark(h);
        self.push(value, Op::RationalHat { points, segments, centers, radii })
    }

    /// Summed negative log-likelihood of a column of scores under a
    /// two-component Gaussian mixture with learnable widths.
    pub fn mixture_nll(&mut self, scores: Var, r1: Var, r2: Var, shape: MixtureShape) -> Var {
        let (rv1, rv2) = (self.scalar(r1), self.scalar(r2));
        let total: f64 = self.value(scores).iter().map(|&s| edge_nll_and_grad(s, shape, rv1, rv2).0).sum();
        self.push(scalar(total), Op::MixtureNll { scores, r1, r2, shape })
    }

    /// Propagates a unit adjoint from the 1x1 node `out`.
    pub fn backward(&mut self, out: Var) -> Result<()> {
        let seed = match self.nodes.get(out.0) {
            Some(node) if node.value.dim() == (1, 1) => scalar(1.0),
            Some(node) => {
                return Err(Error::State(format!("backward needs a scalar output, got {:?}", node.value.dim())))
            }
            None => return Err(Error::State("output was never recorded on this tape".into())),
        };
        self.backward_seeded(out, seed)
    }

    /// Propagates the adjoint `seed` (same shape as `out`) back to every node.
    pub fn backward_seeded(&mut self, out: Var, seed: Tensor) -> Result<()> {
        let Some(node) = self.nodes.get(out.0) else {
            return Err(Error::State("output was never recorded on this tape".into()));
        };
        if node.value.dim() != seed.dim() {
            return Err(Error::State("seed shape does not match output".into()));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[out.0] = Some(seed);
        for i in (0..=out.0).rev() {
            let Some(g) = grads[i].take() else { continue };
            self.propagate(i, &g, &mut grads);
            grads[i] = Some(g);
        }
        self.grads = Some(grads);
        Ok(())
    }

    /// Adjoint of `v` after [`Tape::backward`]; zero when `v` does not
    /// influence the output.
    pub fn grad(&self, v: Var) -> Result<Tensor> {
        let grads = self.grads.as_ref().ok_or_else(|| Error::State("backward has not been run".into()))?;
        Ok(grads
            .get(v.0)
            .and_then(Clone::clone)
            .unwrap_or_else(|| Array2::zeros(self.nodes[v.0].value.raw_dim())))
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        fn acc(grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
            match &mut grads[v.0] {
                Some(existing) => *existing += &delta,
                slot @ None => *slot = Some(delta),
            }
        }
        let value = &self.nodes[i].value;
        match &self.nodes[i].op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                acc(grads, *a, g.clone());
                acc(grads, *b, -g);
            }
            Op::Mul(a, b) => {
                acc(grads, *a, g * self.value(*b));
                acc(grads, *b, g * self.value(*a));
            }
            Op::AddRow(a, row) => {
                acc(grads, *a, g.clone());
                acc(grads, *row, g.sum_axis(Axis(0)).insert_axis(Axis(0)));
            }
            Op::MulScalarVar(a, s) => {
                acc(grads, *a, g * self.scalar(*s));
                acc(grads, *s, scalar((g * self.value(*a)).sum()));
            }
            Op::Scale(a, k) => acc(grads, *a, g * *k),
            Op::AddConst(a) => acc(grads, *a, g.clone()),
            Op::MatMul(a, b) => {
                acc(grads, *a, g.dot(&self.value(*b).t()));
                acc(grads, *b, self.value(*a).t().dot(g));
            }
            Op::Relu(a) => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(*a), |d, &x| {
                    if x <= 0.0 {
                        *d = 0.0
                    }
                });
                acc(grads, *a, d);
            }
            Op::Sigmoid(a) => {
                let mut d = g.clone();
                d.zip_mut_with(value, |d, &y| *d *= y * (1.0 - y));
                acc(grads, *a, d);
            }
            Op::Exp(a) => acc(grads, *a, g * value),
            Op::Log(a) => acc(grads, *a, g / self.value(*a)),
            Op::Abs(a) => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(*a), |d, &x| *d *= if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 });
                acc(grads, *a, d);
            }
            Op::Powi(a, n) => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(*a), |d, &x| *d *= *n as f64 * x.powi(n - 1));
                acc(grads, *a, d);
            }
            Op::Sum(a) => acc(grads, *a, Array2::from_elem(self.value(*a).raw_dim(), g[[0, 0]])),
            Op::MeanRows(a) => {
                let n = self.value(*a).nrows().max(1) as f64;
                let row = g / n;
                let d = Array2::from_shape_fn(self.value(*a).raw_dim(), |(_, j)| row[[0, j]]);
                acc(grads, *a, d);
            }
            Op::SegmentSum { x, segments } => {
                let d = Array2::from_shape_fn(self.value(*x).raw_dim(), |(r, c)| g[[segments[r], c]]);
                acc(grads, *x, d);
            }
            Op::Softmax(a) => {
                let mut d = Array2::zeros(value.raw_dim());
                for ((mut out, y), gy) in d.outer_iter_mut().zip(value.outer_iter()).zip(g.outer_iter()) {
                    let dot: f64 = y.iter().zip(gy.iter()).map(|(a, b)| a * b).sum();
                    for j in 0..out.len() {
                        out[j] = y[j] * (gy[j] - dot);
                    }
                }
                acc(grads, *a, d);
            }
            Op::ConcatCols(parts) => {
                let mut start = 0;
                for &p in parts {
                    let w = self.value(p).ncols();
                    acc(grads, p, g.slice(ndarray::s![.., start..start + w]).to_owned());
                    start += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut start = 0;
                for &p in parts {
                    let h = self.value(p).nrows();
                    acc(grads, p, g.slice(ndarray::s![start..start + h, ..]).to_owned());
                    start += h;
                }
            }
            Op::MaxPairs { x, winners } => {
                let mut d = Array2::zeros(self.value(*x).raw_dim());
                for (e, &w) in winners.iter().enumerate() {
                    d[[w, 0]] += g[[e, 0]];
                }
                acc(grads, *x, d);
            }
            Op::ClampMin { x, floor } => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(*x), |d, &v| {
                    if v <= *floor {
                        *d = 0.0
                    }
                });
                acc(grads, *x, d);
            }
            Op::GatherPairs { x, index } => {
                let mut d = Array2::zeros(self.value(*x).raw_dim());
                for (i, &(a, b)) in index.iter().enumerate() {
                    d[[a, 0]] += g[[i, 0]];
                    d[[b, 0]] += g[[i, 1]];
                }
                acc(grads, *x, d);
            }
            Op::EdgeAggregate { h, weights, edges } => {
                let hv = self.value(*h);
                let mut dh = Array2::zeros(hv.raw_dim());
                let mut dw = Array2::zeros(self.value(*weights).raw_dim());
                let w = self.value(*weights);
                for (e, &(u, v)) in edges.iter().enumerate() {
                    let we = w[[e, 0]];
                    dh.row_mut(u).scaled_add(we, &g.row(v));
                    dh.row_mut(v).scaled_add(we, &g.row(u));
                    dw[[e, 0]] = g.row(v).dot(&hv.row(u)) + g.row(u).dot(&hv.row(v));
                }
                acc(grads, *h, dh);
                acc(grads, *weights, dw);
            }
            Op::Logit(a) => {
                let mut d = g.clone();
                d.zip_mut_with(self.value(*a), |d, &s| {
                    if (SCORE_CLAMP..=1.0 - SCORE_CLAMP).contains(&s) {
                        let s = clamp_score(s);
                        *d /= s * (1.0 - s);
                    } else {
                        *d = 0.0;
                    }
                });
                acc(grads, *a, d);
            }
            Op::CrossEntropy { logits, labels } => {
                let x = self.value(*logits);
                let scale = g[[0, 0]] / x.nrows().max(1) as f64;
                let mut d = Array2::zeros(x.raw_dim());
                for ((mut out, row), &label) in d.outer_iter_mut().zip(x.outer_iter()).zip(labels.iter()) {
                    let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                    let total: f64 = row.iter().map(|&v| (v - max).exp()).sum();
                    for j in 0..row.len() {
                        out[j] = scale * ((row[j] - max).exp() / total - if j == label { 1.0 } else { 0.0 });
                    }
                }
                acc(grads, *logits, d);
            }
            Op::RationalHat { points, segments, centers, radii } => {
                let (p, c, r) = (self.value(*points), self.value(*centers), self.value(*radii));
                let mut dp = Array2::zeros(p.raw_dim());
                let mut dc = Array2::zeros(c.raw_dim());
                let mut dr = Array2::zeros(r.raw_dim());
                for (i, row) in p.outer_iter().enumerate() {
                    for j in 0..c.nrows() {
                        let up = g[[segments[i], j]];
                        if up == 0.0 {
                            continue;
                        }
                        let (_, pg) = point_hat_and_grad([row[0], row[1]], [c[[j, 0]], c[[j, 1]]], r[[j, 0]]);
                        dp[[i, 0]] += up * pg.point[0];
                        dp[[i, 1]] += up * pg.point[1];
                        dc[[j, 0]] += up * pg.center[0];
                        dc[[j, 1]] += up * pg.center[1];
                        dr[[j, 0]] += up * pg.radius;
                    }
                }
                acc(grads, *points, dp);
                acc(grads, *centers, dc);
                acc(grads, *radii, dr);
            }
            Op::MixtureNll { scores, r1, r2, shape } => {
                let up = g[[0, 0]];
                let (rv1, rv2) = (self.scalar(*r1), self.scalar(*r2));
                let s = self.value(*scores);
                let mut ds = Array2::zeros(s.raw_dim());
                let (mut d1, mut d2) = (0.0, 0.0);
                for (out, &x) in ds.iter_mut().zip(s.iter()) {
                    let (_, grad) = edge_nll_and_grad(x, *shape, rv1, rv2);
                    *out = up * grad.score;
                    d1 += up * grad.r1;
                    d2 += up * grad.r2;
                }
                acc(grads, *scores, ds);
                acc(grads, *r1, scalar(d1));
                acc(grads, *r2, scalar(d2));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn sum_of_leaf_has_unit_gradient() {
        let mut tape = Tape::new();
        let x = tape.leaf(array![[1.0, -2.0], [3.5, 0.0]]);
        let s = tape.sum(x);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(x).unwrap(), Array2::from_elem((2, 2), 1.0));
    }

    #[test]
    fn backward_errors() {
        let mut tape = Tape::new();
        assert!(matches!(tape.backward(Var(0)), Err(Error::State(_))));
        let x = tape.leaf(array![[1.0, 2.0]]);
        assert!(matches!(tape.backward(x), Err(Error::State(_))));
        assert!(matches!(tape.grad(x), Err(Error::State(_))));
    }

    #[test]
    fn matmul_gradient() {
        let mut tape = Tape::new();
        let a = tape.leaf(array![[1.0, 2.0], [3.0, 4.0]]);
        let b = tape.leaf(array![[0.5], [-1.0]]);
        let c = tape.matmul(a, b);
        let s = tape.sum(c);
        tape.backward(s).unwrap();
        assert_eq!(tape.grad(a).unwrap(), array![[0.5, -1.0], [0.5, -1.0]]);
        assert_eq!(tape.grad(b).unwrap(), array![[4.0], [6.0]]);
    }

    #[test]
    fn max_pairs_routes_to_winner() {
        let mut tape = Tape::new();
        let x = tape.column(&[0.2, 0.7, 0.7]);
        let m = tape.max_pairs(x, &[(0, 1), (2, 1)]);
        assert_eq!(tape.value(m).column(0).to_vec(), vec![0.7, 0.7]);
        let s = tape.sum(m);
        tape.backward(s).unwrap();
        // tie between nodes 1 and 2 goes to node 1
        assert_eq!(tape.grad(x).unwrap().column(0).to_vec(), vec![0.0, 2.0, 0.0]);
    }

    #[test]
    fn unused_nodes_get_zero_adjoint() {
        let mut tape = Tape::new();
        let x = tape.scalar_leaf(2.0);
        let y = tape.scalar_leaf(5.0);
        let z = tape.mul(x, x);
        tape.backward(z).unwrap();
        assert_eq!(tape.scalar(z), 4.0);
        assert_eq!(tape.grad(x).unwrap()[[0, 0]], 4.0);
        assert_eq!(tape.grad(y).unwrap()[[0, 0]], 0.0);
    }
}
