//! Graphs, node-score filtrations and their threshold partition.
//!
//! Filtration time is `1 - score`: the most important simplices enter first.
//! Node scores are extended to edges with the lower-star rule (an edge enters
//! once both of its endpoints are present), and a filtration is split at a
//! threshold into the rationale side (`time < t`) and the complement side.

use std::collections::HashSet;
use std::io::{BufRead, Write};

use rand_distr::{Distribution, Gumbel};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default threshold separating the rationale side from the complement side.
pub const PARTITION_THRESHOLD: f64 = 0.5;

/// Scores are kept this far away from 0 and 1 before taking a logit.
pub const SCORE_CLAMP: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub num_nodes: usize,
    /// Undirected edges stored as `(u, v)` with `u < v`.
    pub edges: Vec<(usize, usize)>,
    pub node_features: Vec<Vec<f64>>,
    pub label: usize,
    pub gt_edge_mask: Option<Vec<bool>>,
}

impl Graph {
    /// Builds a graph, normalising every edge to `u < v` and rejecting
    /// self-loops, duplicates and out-of-range endpoints.
    pub fn new(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        node_features: Vec<Vec<f64>>,
        label: usize,
        gt_edge_mask: Option<Vec<bool>>,
    ) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in &edges {
            if a == b {
                return Err(Error::Precondition(format!("self-loop on node {a}")));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if v >= num_nodes {
                return Err(Error::Precondition(format!(
                    "edge ({u}, {v}) out of range for {num_nodes} nodes"
                )));
            }
            if !seen.insert((u, v)) {
                return Err(Error::Precondition(format!("duplicate edge ({u}, {v})")));
            }
            normalized.push((u, v));
        }
        if node_features.len() != num_nodes {
            return Err(Error::Precondition(format!(
                "{} feature rows for {num_nodes} nodes",
                node_features.len()
            )));
        }
        if let Some(first) = node_features.first() {
            if node_features.iter().any(|f| f.len() != first.len()) {
                return Err(Error::Precondition("ragged node features".into()));
            }
        }
        if let Some(mask) = &gt_edge_mask {
            if mask.len() != normalized.len() {
                return Err(Error::Precondition(format!(
                    "gt mask has {} entries for {} edges",
                    mask.len(),
                    normalized.len()
                )));
            }
        }
        Ok(Self { num_nodes, edges: normalized, node_features, label, gt_edge_mask })
    }

    /// A graph with constant scalar features, used by tests and examples.
    pub fn unlabeled(num_nodes: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        Self::new(num_nodes, edges, vec![vec![1.0]; num_nodes], 0, None)
    }

    pub fn feature_dim(&self) -> usize {
        self.node_features.first().map_or(0, Vec::len)
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Returns a copy with edges sorted lexicographically; the mask follows.
    pub fn sorted_edges(&self) -> Graph {
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&e| self.edges[e]);
        Graph {
            num_nodes: self.num_nodes,
            edges: order.iter().map(|&e| self.edges[e]).collect(),
            node_features: self.node_features.clone(),
            label: self.label,
            gt_edge_mask: self.gt_edge_mask.as_ref().map(|m| order.iter().map(|&e| m[e]).collect()),
        }
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.num_nodes {
            return Err(Error::Precondition("permutation length mismatch".into()));
        }
        let mut features = vec![Vec::new(); self.num_nodes];
        for (i, f) in self.node_features.iter().enumerate() {
            features[perm[i]] = f.clone();
        }
        let edges = self.edges.iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        Graph::new(self.num_nodes, edges, features, self.label, self.gt_edge_mask.clone())
    }

    pub fn is_connected(&self) -> bool {
        if self.num_nodes == 0 {
            return true;
        }
        let mut uf = crate::persistence::UnionFind::new(self.num_nodes);
        for &(u, v) in &self.edges {
            uf.union(u, v);
        }
        uf.count() == 1
    }
}

/// One line of the JSON-lines dataset format.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphRecord {
    pub num_nodes: usize,
    pub edges: Vec<[usize; 2]>,
    pub features: Vec<Vec<f64>>,
    pub label: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gt_mask: Option<Vec<u8>>,
}

impl From<&Graph> for GraphRecord {
    fn from(g: &Graph) -> Self {
        let g = g.sorted_edges();
        GraphRecord {
            num_nodes: g.num_nodes,
            edges: g.edges.iter().map(|&(u, v)| [u, v]).collect(),
            features: g.node_features,
            label: g.label,
            gt_mask: g.gt_edge_mask.map(|m| m.into_iter().map(u8::from).collect()),
        }
    }
}

impl TryFrom<GraphRecord> for Graph {
    type Error = Error;

    fn try_from(r: GraphRecord) -> Result<Self> {
        let mask = match r.gt_mask {
            Some(m) => Some(
                m.into_iter()
                    .map(|x| match x {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(Error::Parse(format!("gt_mask entry {other} is not 0 or 1"))),
                    })
                    .collect::<Result<Vec<_>>>()?,
            ),
            None => None,
        };
        let features = if r.features.is_empty() && r.num_nodes > 0 {
            vec![vec![1.0]; r.num_nodes]
        } else {
            r.features
        };
        Graph::new(r.num_nodes, r.edges.into_iter().map(|[u, v]| (u, v)).collect(), features, r.label, mask)
    }
}

pub fn write_jsonl<W: Write>(mut out: W, graphs: &[Graph]) -> Result<()> {
    for g in graphs {
        serde_json::to_writer(&mut out, &GraphRecord::from(g))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> Result<Vec<Graph>> {
    let mut graphs = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: GraphRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        graphs.push(Graph::try_from(record)?);
    }
    Ok(graphs)
}

/// A simplex of a graph filtration, identified by its index in the parent graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Simplex {
    Node(usize),
    Edge(usize),
}

impl Simplex {
    pub fn dim(self) -> usize {
        match self {
            Simplex::Node(_) => 0,
            Simplex::Edge(_) => 1,
        }
    }
}

impl std::fmt::Display for Simplex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Simplex::Node(i) => write!(f, "v{i}"),
            Simplex::Edge(e) => write!(f, "e{e}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexEdge {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub time: f64,
}

/// A filtered 1-dimensional complex: nodes `(id, time)` and timed edges.
/// Ids refer to the parent graph so that persistence pairs can be routed
/// back to the simplices that created them.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Complex {
    pub nodes: Vec<(usize, f64)>,
    pub edges: Vec<ComplexEdge>,
}

impl Complex {
    pub fn num_simplices(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn node_time(&self, id: usize) -> Option<f64> {
        self.nodes.iter().find(|&&(n, _)| n == id).map(|&(_, t)| t)
    }

    /// Time of a simplex of this complex, `None` when absent.
    pub fn time_of(&self, s: Simplex) -> Option<f64> {
        match s {
            Simplex::Node(i) => self.node_time(i),
            Simplex::Edge(e) => self.edges.iter().find(|x| x.id == e).map(|x| x.time),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilteredGraph {
    pub num_nodes: usize,
    pub edges: Vec<(usize, usize)>,
    pub node_scores: Vec<f64>,
    pub edge_scores: Vec<f64>,
    pub node_times: Vec<f64>,
    pub edge_times: Vec<f64>,
}

fn check_unit(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|x| !(0.0..=1.0).contains(x)) {
        Some(i) => Err(Error::Domain(format!("{what}[{i}] = {} outside [0, 1]", values[i]))),
        None => Ok(()),
    }
}

/// Extends node importance scores to edges with `score(u, v) = min(score(u), score(v))`.
pub fn lower_star_extend(graph: &Graph, node_scores: &[f64]) -> Result<FilteredGraph> {
    if node_scores.len() != graph.num_nodes {
        return Err(Error::Precondition(format!(
            "{} scores for {} nodes",
            node_scores.len(),
            graph.num_nodes
        )));
    }
    check_unit(node_scores, "node_scores")?;
    let node_times: Vec<f64> = node_scores.iter().map(|s| 1.0 - s).collect();
    let edge_times: Vec<f64> = graph.edges.iter().map(|&(u, v)| node_times[u].max(node_times[v])).collect();
    Ok(FilteredGraph {
        num_nodes: graph.num_nodes,
        edges: graph.edges.clone(),
        node_scores: node_scores.to_vec(),
        edge_scores: edge_times.iter().map(|t| 1.0 - t).collect(),
        node_times,
        edge_times,
    })
}

impl FilteredGraph {
    /// A filtration given directly by simplex times. Every edge must enter
    /// no earlier than its endpoints.
    pub fn from_times(
        num_nodes: usize,
        edges: Vec<(usize, usize)>,
        node_times: Vec<f64>,
        edge_times: Vec<f64>,
    ) -> Result<Self> {
        if node_times.len() != num_nodes || edge_times.len() != edges.len() {
            return Err(Error::Precondition("time vector length mismatch".into()));
        }
        check_unit(&node_times, "node_times")?;
        check_unit(&edge_times, "edge_times")?;
        for (e, &(u, v)) in edges.iter().enumerate() {
            if u >= num_nodes || v >= num_nodes {
                return Err(Error::Precondition(format!("edge {e} out of range")));
            }
            if edge_times[e] < node_times[u] || edge_times[e] < node_times[v] {
                return Err(Error::Precondition(format!(
                    "edge {e} enters at {} before one of its endpoints",
                    edge_times[e]
                )));
            }
        }
        Ok(Self {
            num_nodes,
            edges,
            node_scores: node_times.iter().map(|t| 1.0 - t).collect(),
            edge_scores: edge_times.iter().map(|t| 1.0 - t).collect(),
            node_times,
            edge_times,
        })
    }

    /// Endpoint whose time the edge inherits; ties go to the lower node index.
    pub fn edge_argmax(&self, e: usize) -> usize {
        let (u, v) = self.edges[e];
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        if self.node_times[hi] > self.node_times[lo] {
            hi
        } else {
            lo
        }
    }

    pub fn complex(&self) -> Complex {
        Complex {
            nodes: self.node_times.iter().copied().enumerate().collect(),
            edges: self
                .edges
                .iter()
                .zip(&self.edge_times)
                .enumerate()
                .map(|(id, (&(u, v), &time))| ComplexEdge { id, u, v, time })
                .collect(),
        }
    }

    /// Betti numbers of the subgraph present at `time`.
    pub fn betti_at(&self, time: f64) -> (usize, usize) {
        let present: Vec<bool> = self.node_times.iter().map(|&t| t <= time).collect();
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .zip(&self.edge_times)
            .filter(|(_, &t)| t <= time)
            .map(|(&e, _)| e)
            .collect();
        crate::persistence::betti_numbers(&present, &edges)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PartitionedFiltration {
    pub x_side: Complex,
    pub eps_side: Complex,
    pub threshold: f64,
}

/// Splits a filtration at `t`. Edges with `time < t` and nodes with
/// `time < t` form the rationale side; the remaining edges form the
/// complement side together with their endpoints, which enter no earlier
/// than `t`. Times keep their global values.
pub fn partition(fg: &FilteredGraph, t: f64) -> Result<PartitionedFiltration> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::Domain(format!("threshold {t} outside (0, 1)")));
    }
    let mut x_side = Complex::default();
    let mut eps_side = Complex::default();
    for (id, &time) in fg.node_times.iter().enumerate() {
        if time < t {
            x_side.nodes.push((id, time));
        }
    }
    let mut eps_nodes = vec![false; fg.num_nodes];
    for (id, (&(u, v), &time)) in fg.edges.iter().zip(&fg.edge_times).enumerate() {
        let edge = ComplexEdge { id, u, v, time };
        if time < t {
            x_side.edges.push(edge);
        } else {
            eps_nodes[u] = true;
            eps_nodes[v] = true;
            eps_side.edges.push(edge);
        }
    }
    eps_side.nodes = eps_nodes
        .iter()
        .enumerate()
        .filter(|(_, &present)| present)
        .map(|(id, _)| (id, fg.node_times[id].max(t)))
        .collect();
    Ok(PartitionedFiltration { x_side, eps_side, threshold: t })
}

/// Difference of two independent standard Gumbel draws (a logistic sample).
pub fn logistic_noise<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    let gumbel = Gumbel::new(0.0, 1.0).expect("unit Gumbel");
    gumbel.sample(rng) - gumbel.sample(rng)
}

pub fn clamp_score(score: f64) -> f64 {
    score.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

pub fn logit(score: f64) -> f64 {
    let s = clamp_score(score);
    (s / (1.0 - s)).ln()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary-concrete gate for a fixed noise sample.
pub fn gate_with_noise(score: f64, noise: f64, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature {temperature} must be positive")));
    }
    Ok(sigmoid((logit(score) + noise) / temperature))
}

/// Relaxed Bernoulli sample `sigmoid((logit(s) + g1 - g2) / tau)`.
pub fn gumbel_gate<R: rand::Rng + ?Sized>(score: f64, temperature: f64, rng: &mut R) -> Result<f64> {
    if !(temperature > 0.0) {
        return Err(Error::Domain(format!("temperature {temperature} must be positive")));
    }
    let noise = logistic_noise(rng);
    gate_with_noise(score, noise, temperature)
}

/// Uniform draw in `[0, 1)`, shared by generators that need raw uniforms.
pub fn uniform<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn path(n: usize) -> Graph {
        Graph::unlabeled(n, (0..n - 1).map(|i| (i, i + 1)).collect()).unwrap()
    }

    #[test]
    fn graph_rejects_bad_edges() {
        assert!(Graph::unlabeled(3, vec![(0, 0)]).is_err());
        assert!(Graph::unlabeled(3, vec![(0, 1), (1, 0)]).is_err());
        assert!(Graph::unlabeled(3, vec![(0, 3)]).is_err());
        let g = Graph::unlabeled(3, vec![(2, 1)]).unwrap();
        assert_eq!(g.edges, vec![(1, 2)]);
        assert!(Graph::new(2, vec![(0, 1)], vec![vec![1.0]; 2], 0, Some(vec![true, false])).is_err());
    }

    #[test]
    fn unit_scores_give_zero_times() {
        let g = path(5);
        let fg = lower_star_extend(&g, &[1.0; 5]).unwrap();
        assert!(fg.edge_times.iter().all(|&t| t == 0.0));
    }

    #[test]
    fn edge_takes_min_score() {
        let g = Graph::unlabeled(2, vec![(0, 1)]).unwrap();
        let fg = lower_star_extend(&g, &[0.9, 0.7]).unwrap();
        assert!((fg.edge_scores[0] - 0.7).abs() < 1e-15);
        assert!((fg.edge_times[0] - 0.3).abs() < 1e-15);
        assert_eq!(fg.edge_argmax(0), 1);
    }

    #[test]
    fn lower_star_matches_brute_force() {
        let mut rng = rng_from_seed(11);
        let mut edges = Vec::new();
        for u in 0..6 {
            for v in u + 1..6 {
                if uniform(&mut rng) < 0.5 {
                    edges.push((u, v));
                }
            }
        }
        let g = Graph::unlabeled(6, edges).unwrap();
        let scores: Vec<f64> = (0..6).map(|_| uniform(&mut rng)).collect();
        let fg = lower_star_extend(&g, &scores).unwrap();
        for (e, &(u, v)) in g.edges.iter().enumerate() {
            let expected = if scores[u] < scores[v] { scores[u] } else { scores[v] };
            assert_eq!(fg.edge_scores[e], 1.0 - (1.0 - expected));
            assert_eq!(fg.edge_times[e], fg.node_times[u].max(fg.node_times[v]));
        }
    }

    #[test]
    fn scores_out_of_range_are_domain_errors() {
        let g = path(2);
        assert!(matches!(lower_star_extend(&g, &[1.2, 0.5]), Err(Error::Domain(_))));
        assert!(matches!(lower_star_extend(&g, &[-0.1, 0.5]), Err(Error::Domain(_))));
    }

    #[test]
    fn tie_routes_to_lower_index() {
        let g = Graph::unlabeled(3, vec![(1, 2)]).unwrap();
        let fg = lower_star_extend(&g, &[0.1, 0.4, 0.4]).unwrap();
        assert_eq!(fg.edge_argmax(0), 1);
    }

    fn star_with_edge_scores(scores: &[f64]) -> FilteredGraph {
        // Center node 0 has score 1 so each edge inherits its leaf's score.
        let n = scores.len() + 1;
        let g = Graph::unlabeled(n, (1..n).map(|i| (0, i)).collect()).unwrap();
        let mut node_scores = vec![1.0];
        node_scores.extend_from_slice(scores);
        lower_star_extend(&g, &node_scores).unwrap()
    }

    #[test]
    fn partition_all_rational() {
        let fg = star_with_edge_scores(&[0.9, 0.8, 0.6]);
        let p = partition(&fg, 0.5).unwrap();
        assert_eq!(p.eps_side.edges.len(), 0);
        assert_eq!(p.x_side.edges.len(), 3);
    }

    #[test]
    fn partition_boundary_goes_to_eps() {
        let fg = star_with_edge_scores(&[0.5, 0.5]);
        let p = partition(&fg, 0.5).unwrap();
        assert_eq!(p.x_side.edges.len(), 0);
        assert_eq!(p.eps_side.edges.len(), 2);
    }

    #[test]
    fn partition_mixed() {
        let fg = star_with_edge_scores(&[0.9, 0.6, 0.2]);
        let p = partition(&fg, 0.5).unwrap();
        assert_eq!(p.x_side.edges.len(), 2);
        assert_eq!(p.eps_side.edges.len(), 1);
        // eps-side nodes enter no earlier than the threshold
        assert_eq!(p.eps_side.nodes, vec![(0, 0.5), (3, 0.8)]);
        assert!(p.x_side.edges.iter().all(|e| e.time < 0.5));
        assert!(p.eps_side.edges.iter().all(|e| e.time >= 0.5));
    }

    #[test]
    fn partition_rejects_bad_threshold() {
        let fg = star_with_edge_scores(&[0.9]);
        assert!(partition(&fg, 0.0).is_err());
        assert!(partition(&fg, 1.0).is_err());
    }

    #[test]
    fn gate_high_temperature_is_half() {
        let mut rng = rng_from_seed(3);
        for &s in &[0.05, 0.5, 0.95] {
            let g = gumbel_gate(s, 1e9, &mut rng).unwrap();
            assert!((g - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn gate_is_reproducible() {
        let a = gumbel_gate(0.7, 1.0, &mut rng_from_seed(42)).unwrap();
        let b = gumbel_gate(0.7, 1.0, &mut rng_from_seed(42)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gate_rejects_nonpositive_temperature() {
        let mut rng = rng_from_seed(3);
        assert!(matches!(gumbel_gate(0.5, 0.0, &mut rng), Err(Error::Domain(_))));
        assert!(matches!(gumbel_gate(0.5, -1.0, &mut rng), Err(Error::Domain(_))));
    }

    #[test]
    fn gate_expectation_increases_with_score() {
        let draws = 100_000;
        let mean = |score: f64| {
            let mut rng = rng_from_seed(9);
            (0..draws).map(|_| gumbel_gate(score, 1.0, &mut rng).unwrap()).sum::<f64>() / draws as f64
        };
        let hi = mean(0.7);
        let lo = mean(0.3);
        assert!(hi > lo + 0.2, "E[gate|0.7]={hi}, E[gate|0.3]={lo}");
    }

    #[test]
    fn gate_monotone_for_fixed_noise() {
        let mut rng = rng_from_seed(5);
        for _ in 0..100 {
            let noise = logistic_noise(&mut rng);
            let a = gate_with_noise(0.3, noise, 1.0).unwrap();
            let b = gate_with_noise(0.31, noise, 1.0).unwrap();
            assert!(b > a);
        }
    }

    #[test]
    fn jsonl_round_trip_sorts_edges() {
        let g = Graph::new(
            4,
            vec![(2, 3), (0, 1), (1, 2)],
            vec![vec![1.0]; 4],
            1,
            Some(vec![true, false, false]),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, std::slice::from_ref(&g)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"edges\":[[0,1],[1,2],[2,3]]"));
        assert!(text.contains("\"gt_mask\":[0,0,1]"));
        let back = read_jsonl(&buf[..]).unwrap();
        assert_eq!(back[0], g.sorted_edges());
    }

    #[test]
    fn jsonl_rejects_bad_mask() {
        let line = r#"{"num_nodes":2,"edges":[[0,1]],"features":[[1],[1]],"label":0,"gt_mask":[2]}"#;
        assert!(read_jsonl(line.as_bytes()).is_err());
    }
}
