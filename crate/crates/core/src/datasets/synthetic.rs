//! Base graphs and the assembly of base + motifs into labelled graphs.

use rand::seq::IndexedRandom;
use rand::Rng as _;

use super::motifs::{gen_motif, MotifKind};
use crate::error::{Error, Result};
use crate::graphs::Graph;
use crate::rng::Rng;

/// Preferential attachment: a clique on `m + 1` nodes, then every new node
/// links to `m` distinct existing nodes chosen with probability
/// proportional to degree. With `m = 1` the result is a tree.
pub fn barabasi_albert(n: usize, m: usize, rng: &mut Rng) -> Result<Vec<(usize, usize)>> {
    if m == 0 || n < m + 1 {
        return Err(Error::Config(format!("preferential attachment needs m >= 1 and n > m, got n = {n}, m = {m}")));
    }
    let mut edges = Vec::new();
    let mut ends = Vec::new();
    for u in 0..=m {
        for v in u + 1..=m {
            edges.push((u, v));
            ends.extend([u, v]);
        }
    }
    for v in m + 1..n {
        let mut picked: Vec<usize> = Vec::with_capacity(m);
        while picked.len() < m {
            let t = *ends.choose(rng).expect("non-empty");
            if !picked.contains(&t) {
                picked.push(t);
            }
        }
        for t in picked {
            edges.push((t, v));
            ends.extend([t, v]);
        }
    }
    Ok(edges)
}

/// Complete binary tree of the given height (`2^(h+1) - 1` nodes).
pub fn binary_tree(height: u32) -> (usize, Vec<(usize, usize)>) {
    let n = (1usize << (height + 1)) - 1;
    (n, (1..n).map(|v| ((v - 1) / 2, v)).collect())
}

/// Two rails of `rungs` nodes joined rung by rung.
pub fn ladder(rungs: usize) -> (usize, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    for i in 0..rungs {
        edges.push((i, rungs + i));
        if i + 1 < rungs {
            edges.push((i, i + 1));
            edges.push((rungs + i, rungs + i + 1));
        }
    }
    (2 * rungs, edges)
}

/// Hub 0 joined to every node of a rim cycle on `n - 1` nodes.
pub fn wheel(n: usize) -> (usize, Vec<(usize, usize)>) {
    let rim = n - 1;
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (0, v)).collect();
    edges.extend((0..rim).map(|i| (1 + i, 1 + (i + 1) % rim)));
    (n, edges)
}

/// Incrementally glues motifs onto a base graph.
pub struct Assembly {
    num_nodes: usize,
    base_nodes: usize,
    edges: Vec<(usize, usize)>,
    gt: Vec<bool>,
}

impl Assembly {
    pub fn new(num_nodes: usize, edges: Vec<(usize, usize)>) -> Self {
        let gt = vec![false; edges.len()];
        Self { num_nodes, base_nodes: num_nodes, edges, gt }
    }

    /// Adds a motif plus one bridge edge between a random motif node and a
    /// random base node. The bridge is not part of the rationale.
    pub fn attach(&mut self, kind: MotifKind, rng: &mut Rng) {
        let motif = gen_motif(kind);
        let off = self.num_nodes;
        for &(u, v) in &motif.edges {
            self.edges.push((u + off, v + off));
            self.gt.push(true);
        }
        let anchor = rng.random_range(0..self.base_nodes);
        let inner = off + rng.random_range(0..motif.num_nodes);
        self.edges.push((anchor, inner));
        self.gt.push(false);
        self.num_nodes += motif.num_nodes;
    }

    /// The finished graph lists its edges in sorted order.
    pub fn finish(self, features: Vec<Vec<f64>>, label: usize) -> Result<Graph> {
        Ok(Graph::new(self.num_nodes, self.edges, features, label, Some(self.gt))?.sorted_edges())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }
}
