//! Exhaustive desk check of the unique-optimum claim on tiny graphs.
//!
//! Every binary edge filtration `f: E -> {0, 1}` is scored with
//! `CE - alpha * (lambda0 * d0 + d1)`, where the `d`s are bottleneck
//! distances between the two sides of the partition at 0.5 and CE comes from
//! an oracle that is right exactly when every rationale edge scores above
//! 0.5. Nodes enter at time 0, so the filtration is purely an edge
//! filtration; complement-side nodes are then clamped to 0.5 by the
//! partition.

use rand::Rng as _;
use serde::Serialize;

use crate::diagram_metrics::{bottleneck_with, DiagonalConvention};
use crate::error::{Error, Result};
use crate::graphs::{partition, FilteredGraph, Graph, PARTITION_THRESHOLD};
use crate::persistence::compute_ph;
use crate::rng::{rng_for, stream};

pub const MAX_THEOREM_EDGES: usize = 12;

/// Cross-entropy of the oracle: a perfect prediction, or a uniform guess
/// over two classes.
pub fn oracle_cross_entropy(selects_rationale: bool) -> f64 {
    if selects_rationale {
        0.0
    } else {
        std::f64::consts::LN_2
    }
}

#[derive(Clone, Debug)]
pub struct TheoremInstance {
    pub name: String,
    /// Carries the rationale as its gt mask.
    pub graph: Graph,
}

impl TheoremInstance {
    pub fn new(name: impl Into<String>, graph: Graph) -> Result<Self> {
        if graph.gt_edge_mask.is_none() {
            return Err(Error::Precondition("theorem instances need a rationale mask".into()));
        }
        Ok(Self { name: name.into(), graph })
    }

    fn mask(&self) -> &[bool] {
        self.graph.gt_edge_mask.as_deref().expect("checked in new")
    }

    /// `|E_X*| < |E_eps*|`.
    pub fn precondition_holds(&self) -> bool {
        let x = self.mask().iter().filter(|&&m| m).count();
        x < self.graph.num_edges() - x
    }
}

/// Loss terms of one binary filtration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FiltrationLoss {
    pub cross_entropy: f64,
    pub d0: f64,
    pub d1: f64,
    pub total: f64,
}

pub fn binary_filtration_loss(
    graph: &Graph,
    rationale: &[bool],
    selected: &[bool],
    alpha: f64,
    lambda0: f64,
    convention: DiagonalConvention,
) -> Result<FiltrationLoss> {
    let edge_times = selected.iter().map(|&s| if s { 0.0 } else { 1.0 }).collect();
    let fg = FilteredGraph::from_times(graph.num_nodes, graph.edges.clone(), vec![0.0; graph.num_nodes], edge_times)?;
    let parts = partition(&fg, PARTITION_THRESHOLD)?;
    let (x, eps) = (compute_ph(&parts.x_side)?, compute_ph(&parts.eps_side)?);
    let d0 = bottleneck_with(&x, &eps, 0, convention);
    let d1 = bottleneck_with(&x, &eps, 1, convention);
    let covers = rationale.iter().zip(selected).all(|(&r, &s)| !r || s);
    let cross_entropy = oracle_cross_entropy(covers);
    Ok(FiltrationLoss { cross_entropy, d0, d1, total: cross_entropy - alpha * (lambda0 * d0 + d1) })
}

#[derive(Clone, Debug, Serialize)]
pub struct InstanceReport {
    pub name: String,
    pub convention: &'static str,
    pub edges: usize,
    pub rationale_edges: usize,
    pub precondition: bool,
    /// Filtrations enumerated (0 when the precondition failed).
    pub enumerated: usize,
    pub best_total: f64,
    pub indicator: Option<FiltrationLoss>,
    /// Every minimiser, as bit masks over the edge list.
    pub argmin: Vec<u32>,
    pub unique_indicator: bool,
}

/// Losses within this of the minimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

pub fn check_instance(
    inst: &TheoremInstance,
    alpha: f64,
    lambda0: f64,
    convention: DiagonalConvention,
) -> Result<InstanceReport> {
    let m = inst.graph.num_edges();
    if m > MAX_THEOREM_EDGES {
        return Err(Error::Precondition(format!("{}: {m} edges exceed the cap of {MAX_THEOREM_EDGES}", inst.name)));
    }
    let rationale = inst.mask();
    let indicator_bits = rationale.iter().enumerate().fold(0u32, |acc, (e, &r)| acc | (r as u32) << e);
    let mut report = InstanceReport {
        name: inst.name.clone(),
        convention: convention.name(),
        edges: m,
        rationale_edges: rationale.iter().filter(|&&r| r).count(),
        precondition: inst.precondition_holds(),
        enumerated: 0,
        best_total: f64::NAN,
        indicator: None,
        argmin: Vec::new(),
        unique_indicator: false,
    };
    if !report.precondition {
        return Ok(report);
    }
    let mut losses = Vec::with_capacity(1 << m);
    for bits in 0u32..1 << m {
        let selected: Vec<bool> = (0..m).map(|e| bits >> e & 1 == 1).collect();
        losses.push(binary_filtration_loss(&inst.graph, rationale, &selected, alpha, lambda0, convention)?);
    }
    let best = losses.iter().map(|l| l.total).fold(f64::INFINITY, f64::min);
    report.enumerated = losses.len();
    report.best_total = best;
    report.indicator = Some(losses[indicator_bits as usize]);
    report.argmin = (0..losses.len() as u32).filter(|&b| losses[b as usize].total <= best + TIE_TOLERANCE).collect();
    report.unique_indicator = report.argmin == [indicator_bits];
    Ok(report)
}

/// A rationale motif glued to a random tree of `tree_edges` complement
/// edges; the first tree edge hangs off a motif node.
pub fn motif_with_tree(motif: &[(usize, usize)], motif_nodes: usize, tree_edges: usize, seed: u64) -> Result<Graph> {
    let mut rng = rng_for(seed, stream::THEOREM, tree_edges as u64);
    let mut edges = motif.to_vec();
    let mut gt = vec![true; motif.len()];
    for k in 0..tree_edges {
        let v = motif_nodes + k;
        let u = rng.random_range(0..v);
        edges.push((u, v));
        gt.push(false);
    }
    let n = motif_nodes + tree_edges;
    Ok(Graph::new(n, edges, vec![vec![1.0]; n], 1, Some(gt))?.sorted_edges())
}

/// Twenty instances over four motifs, all within the edge cap and with
/// fewer rationale than complement edges. The first is a triangle with a
/// five-edge tree.
pub fn theorem_instances() -> Result<Vec<TheoremInstance>> {
    let triangle = [(0, 1), (1, 2), (0, 2)];
    let square = [(0, 1), (1, 2), (2, 3), (0, 3)];
    let diamond = [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)];
    let cycle5 = [(0, 1), (1, 2), (2, 3), (3, 4), (0, 4)];
    let plan: [(&str, &[(usize, usize)], usize, [usize; 5]); 4] = [
        ("triangle", &triangle, 3, [5, 4, 6, 7, 9]),
        ("square", &square, 4, [5, 6, 7, 8, 8]),
        ("diamond", &diamond, 4, [6, 7, 7, 6, 7]),
        ("cycle5", &cycle5, 5, [6, 7, 6, 7, 6]),
    ];
    let mut out = Vec::with_capacity(20);
    for (name, motif, nodes, trees) in plan {
        for (i, &t) in trees.iter().enumerate() {
            let g = motif_with_tree(motif, nodes, t, i as u64)?;
            out.push(TheoremInstance::new(format!("{name}+tree{t}#{i}"), g)?);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TheoremReport {
    pub alpha: f64,
    pub lambda0: f64,
    pub instances: Vec<InstanceReport>,
}

impl TheoremReport {
    /// Instances whose unique minimiser is the indicator, per convention.
    pub fn unique_counts(&self) -> Vec<(&'static str, usize, usize)> {
        DiagonalConvention::ALL
            .iter()
            .map(|c| {
                let rows: Vec<&InstanceReport> = self.instances.iter().filter(|r| r.convention == c.name()).collect();
                (c.name(), rows.iter().filter(|r| r.unique_indicator).count(), rows.len())
            })
            .collect()
    }
}

pub fn check_theorem(instances: &[TheoremInstance], alpha: f64, lambda0: f64) -> Result<TheoremReport> {
    let mut rows = Vec::with_capacity(2 * instances.len());
    for convention in DiagonalConvention::ALL {
        for inst in instances {
            rows.push(check_instance(inst, alpha, lambda0, convention)?);
        }
    }
    Ok(TheoremReport { alpha, lambda0, instances: rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn instances_respect_caps() {
        let all = theorem_instances().unwrap();
        assert_eq!(all.len(), 20);
        for inst in &all {
            assert!(inst.graph.num_edges() <= MAX_THEOREM_EDGES, "{}", inst.name);
            assert!(inst.precondition_holds(), "{}", inst.name);
            assert!(inst.graph.is_connected(), "{}", inst.name);
        }
    }

    #[test]
    fn violated_precondition_is_flagged() {
        let g = motif_with_tree(&[(0, 1), (1, 2), (0, 2)], 3, 2, 0).unwrap();
        let inst = TheoremInstance::new("small", g).unwrap();
        let r = check_instance(&inst, 0.01, 16.0, DiagonalConvention::Geometric).unwrap();
        assert!(!r.precondition);
        assert_eq!(r.enumerated, 0);
        assert!(!r.unique_indicator);
    }

    #[test]
    fn size_cap_is_an_error() {
        let g = motif_with_tree(&[(0, 1), (1, 2), (0, 2)], 3, 10, 0).unwrap();
        let inst = TheoremInstance::new("big", g).unwrap();
        assert!(check_instance(&inst, 0.01, 16.0, DiagonalConvention::Geometric).is_err());
    }

    #[test]
    fn without_discrepancy_every_cover_ties() {
        // alpha = 0: every filtration selecting the whole rationale is optimal.
        let inst = &theorem_instances().unwrap()[0];
        let r = check_instance(inst, 0.0, 16.0, DiagonalConvention::Geometric).unwrap();
        let spare = r.edges - r.rationale_edges;
        assert_eq!(r.argmin.len(), 1 << spare);
        assert!(!r.unique_indicator);
    }
}
