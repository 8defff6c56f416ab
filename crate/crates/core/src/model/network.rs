//! The learner: a GIN-style encoder shared by two passes, a filtration head
//! producing node scores, persistence of both sides of the filtration, and a
//! prediction head over pooled embeddings plus structure-element features.

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng as _;
use rayon::prelude::*;

use super::config::Config;
use super::params::{bias, glorot, ParamStore};
use super::prior::{prior_loss_on_tape, MixtureShape};
use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graphs::{logistic_noise, partition, FilteredGraph, Graph, Simplex, PARTITION_THRESHOLD};
use crate::persistence::{compute_ph, PersistenceDiagram};
use crate::rng::Rng;
use crate::vectorize::{
    lower_bound_from_features, per_batch_normalization, structure_features, BankVars, DiagramBatch, Normalization,
    DEFAULT_RADIUS,
};

/// Shapes that are fixed once a model is created.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub in_dim: usize,
    pub hidden: usize,
    pub layers: usize,
    pub classes: usize,
    pub elements: usize,
    /// Width of the one-hot degree block appended to the raw features.
    pub degree_buckets: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub arch: Architecture,
    pub params: ParamStore,
}

const TOPO_HEADS: [&str; 4] = ["topo.a00", "topo.a01", "topo.a10", "topo.a11"];

impl Model {
    pub fn new(arch: Architecture, rng: &mut Rng) -> Result<Self> {
        let Architecture { in_dim, hidden: h, layers, classes, elements: k, degree_buckets } = arch;
        if in_dim == 0 || h == 0 || layers == 0 || classes < 2 || k == 0 {
            return Err(Error::Config(format!("degenerate architecture {arch:?}")));
        }
        let zeros = |r, c| Array2::zeros((r, c));
        let mut p = ParamStore::new();
        let input = in_dim + degree_buckets;
        p.insert("enc.in.w", glorot(input, h, rng))?;
        p.insert("enc.in.b", bias(input, h, rng))?;
        for l in 0..layers {
            p.insert(format!("enc.{l}.eps"), zeros(1, 1))?;
            p.insert(format!("enc.{l}.w1"), glorot(h, h, rng))?;
            p.insert(format!("enc.{l}.b1"), bias(h, h, rng))?;
            p.insert(format!("enc.{l}.w2"), glorot(h, h, rng))?;
            p.insert(format!("enc.{l}.b2"), bias(h, h, rng))?;
        }
        p.insert("filt.w1", glorot(h, h, rng))?;
        p.insert("filt.b1", bias(h, h, rng))?;
        p.insert("filt.w2", glorot(h, 1, rng))?;
        p.insert("filt.b2", bias(h, 1, rng))?;
        p.insert("pred.w1", glorot(h + 4 * k, h, rng))?;
        p.insert("pred.b1", bias(h + 4 * k, h, rng))?;
        p.insert("pred.w2", glorot(h, classes, rng))?;
        p.insert("pred.b2", bias(h, classes, rng))?;
        for d in 0..2 {
            p.insert(format!("topo.c{d}"), Array2::from_shape_fn((k, 2), |_| rng.random::<f64>()))?;
            p.insert(format!("topo.r{d}"), Array2::from_elem((k, 1), DEFAULT_RADIUS))?;
        }
        for name in TOPO_HEADS {
            p.insert(name, zeros(1, k))?;
        }
        p.insert("prior.r1", Array2::from_elem((1, 1), 0.25))?;
        p.insert("prior.r2", Array2::from_elem((1, 1), 0.25))?;
        Ok(Self { arch, params: p })
    }

    /// Recovers the architecture from parameter shapes.
    /// Recovers the architecture from parameter shapes; the degree block
    /// width is not visible in them and comes from the configuration.
    pub fn from_params(params: ParamStore, degree_buckets: usize) -> Result<Self> {
        let w = params.get("enc.in.w")?;
        let (input, hidden) = w.dim();
        let in_dim = input.checked_sub(degree_buckets).filter(|&d| d > 0).ok_or_else(|| {
            Error::Parse(format!("input width {input} cannot hold {degree_buckets} degree buckets"))
        })?;
        let classes = params.get("pred.w2")?.ncols();
        let elements = params.get("topo.c0")?.nrows();
        let layers = (0..).take_while(|l| params.id(&format!("enc.{l}.w1")).is_ok()).count();
        let arch = Architecture { in_dim, hidden, layers, classes, elements, degree_buckets };
        let expected = Self::new(arch, &mut crate::rng::rng_from_seed(0))?;
        if expected.params.names() != params.names()
            || expected.params.tensors().iter().zip(params.tensors()).any(|(a, b)| a.dim() != b.dim())
        {
            return Err(Error::Parse("parameter names or shapes do not form a model".into()));
        }
        Ok(Self { arch, params })
    }

    /// Keeps learnable widths away from zero after an optimiser step.
    pub fn project(&mut self) -> Result<()> {
        for name in ["prior.r1", "prior.r2"] {
            self.params.get_mut(name)?.mapv_inplace(|r| r.max(MIN_PRIOR_WIDTH));
        }
        Ok(())
    }
}

pub const MIN_PRIOR_WIDTH: f64 = 0.02;

/// A disjoint union of graphs processed in one pass.
#[derive(Clone, Debug)]
pub struct Batch {
    pub features: Array2<f64>,
    pub edges: Rc<[(usize, usize)]>,
    pub node_graph: Rc<[usize]>,
    pub node_offsets: Vec<usize>,
    pub edge_offsets: Vec<usize>,
    pub labels: Rc<[usize]>,
    pub graph_count: usize,
    /// Degree of every node in the unweighted graph.
    pub degrees: Vec<usize>,
}

impl Batch {
    pub fn new(graphs: &[&Graph]) -> Result<Self> {
        let Some(first) = graphs.first() else {
            return Err(Error::Precondition("empty batch".into()));
        };
        let dim = first.feature_dim();
        let total_nodes: usize = graphs.iter().map(|g| g.num_nodes).sum();
        let mut features = Array2::zeros((total_nodes, dim));
        let mut edges = Vec::new();
        let mut node_graph = Vec::with_capacity(total_nodes);
        let (mut node_offsets, mut edge_offsets) = (vec![0], vec![0]);
        for (gi, g) in graphs.iter().enumerate() {
            if g.num_nodes == 0 {
                return Err(Error::Precondition(format!("graph {gi} is empty")));
            }
            if g.feature_dim() != dim {
                return Err(Error::Precondition(format!("graph {gi} has feature dimension {}", g.feature_dim())));
            }
            let off = *node_offsets.last().unwrap();
            for (i, f) in g.node_features.iter().enumerate() {
                for (j, &x) in f.iter().enumerate() {
                    features[[off + i, j]] = x;
                }
            }
            edges.extend(g.edges.iter().map(|&(u, v)| (u + off, v + off)));
            node_graph.extend(std::iter::repeat_n(gi, g.num_nodes));
            node_offsets.push(off + g.num_nodes);
            edge_offsets.push(edges.len());
        }
        let mut degrees = vec![0; total_nodes];
        for &(u, v) in &edges {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        Ok(Self {
            features,
            edges: edges.into(),
            node_graph: node_graph.into(),
            node_offsets,
            edge_offsets,
            labels: graphs.iter().map(|g| g.label).collect::<Vec<_>>().into(),
            graph_count: graphs.len(),
            degrees,
        })
    }

    pub fn num_nodes(&self) -> usize {
        *self.node_offsets.last().unwrap()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    fn local_edges(&self, g: usize) -> Vec<(usize, usize)> {
        let off = self.node_offsets[g];
        self.edges[self.edge_offsets[g]..self.edge_offsets[g + 1]].iter().map(|&(u, v)| (u - off, v - off)).collect()
    }
}

/// Training mode draws dropout masks and gate noise from its generator.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut Rng),
}

/// Persistence diagrams of the two sides of one graph's filtration.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitDiagrams {
    pub x_side: PersistenceDiagram,
    pub eps_side: PersistenceDiagram,
}

pub struct Forward {
    pub logits: Var,
    /// `N x 1` node scores.
    pub node_scores: Var,
    /// `E x 1` edge scores, `min` of the endpoint scores.
    pub edge_scores: Var,
    pub diagrams: Vec<SplitDiagrams>,
    /// Structure-element features `[dim0, dim1]` of each side, `B x k`.
    pub psi_x: [Var; 2],
    pub psi_eps: [Var; 2],
    pub bank: BankVars,
    pub prior_widths: [Var; 2],
}

struct Params<'a> {
    store: &'a ParamStore,
    vars: &'a [Var],
}

impl Params<'_> {
    fn get(&self, name: &str) -> Var {
        self.vars[self.store.id(name).expect("model layout")]
    }
}

fn linear(tape: &mut Tape, x: Var, p: &Params, prefix: &str, w: &str, b: &str) -> Var {
    let y = tape.matmul(x, p.get(&format!("{prefix}.{w}")));
    tape.add_row(y, p.get(&format!("{prefix}.{b}")))
}

fn dropout(tape: &mut Tape, x: Var, rate: f64, mode: &mut Mode) -> Var {
    let Mode::Train(rng) = mode else { return x };
    if rate == 0.0 {
        return x;
    }
    let keep = 1.0 / (1.0 - rate);
    let mask = tape.value(x).mapv(|_| if rng.random::<f64>() < rate { 0.0 } else { keep });
    let mask = tape.leaf(mask);
    tape.mul(x, mask)
}

/// Raw features followed by a one-hot of `min(degree, buckets - 1)`. With
/// constant raw features a sum-aggregating ReLU stack sees degree only as a
/// scale, which it struggles to separate from everything else.
fn encoder_input(batch: &Batch, buckets: usize) -> Array2<f64> {
    let raw = batch.features.ncols();
    let mut x = Array2::zeros((batch.num_nodes(), raw + buckets));
    x.slice_mut(ndarray::s![.., ..raw]).assign(&batch.features);
    if buckets > 0 {
        for (v, &d) in batch.degrees.iter().enumerate() {
            x[[v, raw + d.min(buckets - 1)]] = 1.0;
        }
    }
    x
}

fn encode(tape: &mut Tape, p: &Params, arch: &Architecture, batch: &Batch, weights: Var, rate: f64, mode: &mut Mode) -> Var {
    let x = tape.leaf(encoder_input(batch, arch.degree_buckets));
    let h = linear(tape, x, p, "enc.in", "w", "b");
    let mut h = tape.relu(h);
    for l in 0..arch.layers {
        let prefix = format!("enc.{l}");
        let agg = tape.edge_aggregate(h, weights, batch.edges.clone());
        let mixed = tape.mul_scalar_var(h, p.get(&format!("{prefix}.eps")));
        let z = tape.add(h, mixed);
        let z = tape.add(z, agg);
        let z = linear(tape, z, p, &prefix, "w1", "b1");
        let z = tape.relu(z);
        let z = linear(tape, z, p, &prefix, "w2", "b2");
        let z = tape.relu(z);
        h = dropout(tape, z, rate, mode);
    }
    h
}

/// Index into `[node_times; clamped node_times; edge_times; 1.0]`.
struct TimeIndex {
    nodes: usize,
    edges: usize,
}

impl TimeIndex {
    fn of(&self, s: Simplex, eps: bool, node_off: usize, edge_off: usize) -> usize {
        match s {
            Simplex::Node(i) if eps => self.nodes + node_off + i,
            Simplex::Node(i) => node_off + i,
            Simplex::Edge(e) => 2 * self.nodes + edge_off + e,
        }
    }

    fn essential(&self) -> usize {
        2 * self.nodes + self.edges
    }
}

/// Diagrams of both sides for every graph, computed from node and edge times.
pub fn batch_diagrams(batch: &Batch, node_times: &[f64], edge_times: &[f64]) -> Result<Vec<SplitDiagrams>> {
    let graphs: Vec<(usize, Vec<(usize, usize)>, &[f64], &[f64])> = (0..batch.graph_count)
        .map(|g| {
            let (n0, n1) = (batch.node_offsets[g], batch.node_offsets[g + 1]);
            let (e0, e1) = (batch.edge_offsets[g], batch.edge_offsets[g + 1]);
            (n1 - n0, batch.local_edges(g), &node_times[n0..n1], &edge_times[e0..e1])
        })
        .collect();
    graphs
        .into_par_iter()
        .map(|(n, edges, nt, et)| {
            let fg = FilteredGraph::from_times(n, edges, nt.to_vec(), et.to_vec())?;
            let parts = partition(&fg, PARTITION_THRESHOLD)?;
            Ok(SplitDiagrams { x_side: compute_ph(&parts.x_side)?, eps_side: compute_ph(&parts.eps_side)? })
        })
        .collect()
}

pub fn forward(
    tape: &mut Tape,
    model: &Model,
    vars: &[Var],
    batch: &Batch,
    config: &Config,
    mode: &mut Mode,
) -> Result<Forward> {
    let arch = &model.arch;
    if batch.features.ncols() != arch.in_dim {
        return Err(Error::Precondition(format!(
            "features have {} columns, model expects {}",
            batch.features.ncols(),
            arch.in_dim
        )));
    }
    let p = Params { store: &model.params, vars };
    let (n, e) = (batch.num_nodes(), batch.num_edges());

    // Pass 1: unit message weights, node scores, filtration.
    let ones = tape.leaf(Array2::ones((e, 1)));
    let h = encode(tape, &p, arch, batch, ones, config.dropout, mode);
    let f = linear(tape, h, &p, "filt", "w1", "b1");
    let f = tape.relu(f);
    let f = linear(tape, f, &p, "filt", "w2", "b2");
    let node_scores = tape.sigmoid(f);
    let node_times = tape.rsub_const(1.0, node_scores);
    let edge_times = tape.max_pairs(node_times, &batch.edges);
    let edge_scores = tape.rsub_const(1.0, edge_times);

    let nt: Vec<f64> = tape.value(node_times).iter().copied().collect();
    let et: Vec<f64> = tape.value(edge_times).iter().copied().collect();
    let diagrams = batch_diagrams(batch, &nt, &et)?;

    // Diagram coordinates are gathered from the time vector so that the
    // gradient reaches the creator and killer of every point.
    let clamped = tape.clamp_min(node_times, PARTITION_THRESHOLD);
    let cap = tape.leaf(Array2::ones((1, 1)));
    let all_times = tape.concat_rows(&[node_times, clamped, edge_times, cap]);
    let index = TimeIndex { nodes: n, edges: e };
    let mut pairing = 0u64;
    let mut side_batches: Vec<DiagramBatch> = Vec::with_capacity(4);
    for eps in [false, true] {
        for dim in 0..2 {
            let mut pairs = Vec::new();
            let mut segments = Vec::new();
            for (g, d) in diagrams.iter().enumerate() {
                let diagram = if eps { &d.eps_side } else { &d.x_side };
                let (no, eo) = (batch.node_offsets[g], batch.edge_offsets[g]);
                for pt in diagram.dim(dim) {
                    let birth = index.of(pt.creator, eps, no, eo);
                    let death = pt.killer.map_or(index.essential(), |k| index.of(k, eps, no, eo));
                    pairing = pairing.wrapping_mul(1_000_003).wrapping_add((birth as u64) << 24 ^ death as u64);
                    pairs.push((birth, death));
                    segments.push(g);
                }
            }
            let points = tape.gather_pairs(all_times, pairs.into());
            side_batches.push(DiagramBatch { points, segments: segments.into(), count: batch.graph_count });
        }
    }
    tape.note_branch(pairing);

    let c = match config.c_mode {
        Normalization::Constant(c) => c,
        Normalization::PerBatch => {
            let xs: Vec<PersistenceDiagram> = diagrams.iter().map(|d| d.x_side.clone()).collect();
            let es: Vec<PersistenceDiagram> = diagrams.iter().map(|d| d.eps_side.clone()).collect();
            per_batch_normalization(&xs, &es)
        }
    };
    let bank = BankVars {
        centers: [p.get("topo.c0"), p.get("topo.c1")],
        radii: [p.get("topo.r0"), p.get("topo.r1")],
        heads: [[p.get(TOPO_HEADS[0]), p.get(TOPO_HEADS[1])], [p.get(TOPO_HEADS[2]), p.get(TOPO_HEADS[3])]],
        lambda0: tape.scalar_leaf(config.lambda0),
    };
    let psi: Vec<Var> = side_batches
        .iter()
        .enumerate()
        .map(|(i, b)| structure_features(tape, b, bank.centers[i % 2], bank.radii[i % 2], c))
        .collect();
    let (psi_x, psi_eps) = ([psi[0], psi[1]], [psi[2], psi[3]]);

    // Pass 2: messages weighted by gates on the edge scores.
    let weights = match mode {
        Mode::Eval => edge_scores,
        Mode::Train(rng) => {
            let noise = Array2::from_shape_fn((e, 1), |_| logistic_noise(&mut **rng));
            let noise = tape.leaf(noise);
            let z = tape.logit(edge_scores);
            let z = tape.add(z, noise);
            let z = tape.scale(z, 1.0 / config.tau);
            tape.sigmoid(z)
        }
    };
    let h2 = encode(tape, &p, arch, batch, weights, config.dropout, mode);
    let pooled = tape.segment_sum(h2, batch.node_graph.clone(), batch.graph_count);
    let joint = tape.concat_cols(&[pooled, psi_x[0], psi_x[1], psi_eps[0], psi_eps[1]]);
    let z = linear(tape, joint, &p, "pred", "w1", "b1");
    let z = tape.relu(z);
    let logits = linear(tape, z, &p, "pred", "w2", "b2");

    Ok(Forward {
        logits,
        node_scores,
        edge_scores,
        diagrams,
        psi_x,
        psi_eps,
        bank,
        prior_widths: [p.get("prior.r1"), p.get("prior.r2")],
    })
}

/// Loss components; absent terms had a zero coefficient and were not recorded.
pub struct LossTerms {
    pub total: Var,
    pub cross_entropy: Var,
    pub lower_bound: Option<Var>,
    pub prior: Option<Var>,
}

/// `CE - alpha * lower_bound + beta * prior`, the prior averaged over edges.
pub fn loss(tape: &mut Tape, fwd: &Forward, batch: &Batch, config: &Config) -> LossTerms {
    let ce = tape.cross_entropy(fwd.logits, batch.labels.clone());
    let mut total = ce;
    let mut lower_bound = None;
    if config.alpha != 0.0 {
        let lb = lower_bound_from_features(
            tape,
            &fwd.bank,
            fwd.psi_x,
            fwd.psi_eps,
            crate::vectorize::Aggregation::Attention { temperature: crate::vectorize::HEAD_TEMPERATURE },
        );
        let term = tape.scale(lb, -config.alpha);
        total = tape.add(total, term);
        lower_bound = Some(lb);
    }
    let mut prior = None;
    if config.beta != 0.0 && batch.num_edges() > 0 {
        let nll = prior_loss_on_tape(tape, fwd.edge_scores, fwd.prior_widths[0], fwd.prior_widths[1], MixtureShape::default(), 0.0);
        let nll = tape.scale(nll, 1.0 / batch.num_edges() as f64);
        let term = if config.gamma != 0.0 {
            let p1 = tape.powi(fwd.prior_widths[0], -2);
            let p2 = tape.powi(fwd.prior_widths[1], -2);
            let widths = tape.add(p1, p2);
            let widths = tape.scale(widths, config.gamma);
            tape.add(nll, widths)
        } else {
            nll
        };
        let scaled = tape.scale(term, config.beta);
        total = tape.add(total, scaled);
        prior = Some(term);
    }
    LossTerms { total, cross_entropy: ce, lower_bound, prior }
}

/// Evaluation-mode outputs for one batch, read off the tape.
#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    pub logits: Array2<f64>,
    pub node_scores: Vec<f64>,
    pub edge_scores: Vec<f64>,
    pub diagrams: Vec<SplitDiagrams>,
}

impl Prediction {
    pub fn classes(&self) -> Vec<usize> {
        self.logits
            .outer_iter()
            .map(|row| {
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }
}

pub fn predict(model: &Model, batch: &Batch, config: &Config) -> Result<(Prediction, f64)> {
    let mut tape = Tape::new();
    let vars = model.params.on_tape(&mut tape);
    let fwd = forward(&mut tape, model, &vars, batch, config, &mut Mode::Eval)?;
    let ce = tape.cross_entropy(fwd.logits, batch.labels.clone());
    let pred = Prediction {
        logits: tape.value(fwd.logits).clone(),
        node_scores: tape.value(fwd.node_scores).iter().copied().collect(),
        edge_scores: tape.value(fwd.edge_scores).iter().copied().collect(),
        diagrams: fwd.diagrams,
    };
    Ok((pred, tape.scalar(ce)))
}
