//! 0- and 1-dimensional persistent homology of filtered graphs.
//!
//! Every point records the simplex that created it and the simplex that
//! killed it, which is what lets gradients flow from diagram coordinates
//! back to filtration times. Classes alive at the end of the filtration are
//! closed at [`ESSENTIAL_DEATH`].

use crate::error::{Error, Result};
use crate::graphs::{Complex, Simplex};

/// Death time assigned to classes that never die.
pub const ESSENTIAL_DEATH: f64 = 1.0;

/// Largest complex accepted by [`compute_ph_oracle`].
pub const ORACLE_MAX_SIMPLICES: usize = 64;

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
    count: usize,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n], count: n }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `a` and `b` were already connected.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut a, mut b) = (self.find(a), self.find(b));
        if a == b {
            return false;
        }
        if self.size[a] < self.size[b] {
            std::mem::swap(&mut a, &mut b);
        }
        self.parent[b] = a;
        self.size[a] += self.size[b];
        self.count -= 1;
        true
    }

    pub fn count(&self) -> usize {
        self.count
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PersistencePoint {
    pub birth: f64,
    pub death: f64,
    pub dim: usize,
    pub creator: Simplex,
    /// `None` for essential classes.
    pub killer: Option<Simplex>,
}

impl PersistencePoint {
    pub fn is_essential(&self) -> bool {
        self.killer.is_none()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    pub fn coords(&self) -> (f64, f64) {
        (self.birth, self.death)
    }

    fn sort_key(&self) -> (usize, u64, u64, Simplex, Option<Simplex>) {
        (self.dim, self.birth.to_bits(), self.death.to_bits(), self.creator, self.killer)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePoint>,
}

impl PersistenceDiagram {
    pub fn new(points: Vec<PersistencePoint>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self, dim: usize) -> impl Iterator<Item = &PersistencePoint> + '_ {
        self.points.iter().filter(move |p| p.dim == dim)
    }

    /// `(birth, death)` pairs of one dimension.
    pub fn coords(&self, dim: usize) -> Vec<(f64, f64)> {
        self.dim(dim).map(PersistencePoint::coords).collect()
    }

    pub fn essential_count(&self, dim: usize) -> usize {
        self.dim(dim).filter(|p| p.is_essential()).count()
    }

    /// Canonical ordering, so that multiset equality is plain equality.
    pub fn canonical(&self) -> Self {
        let mut points = self.points.clone();
        points.sort_by_key(PersistencePoint::sort_key);
        Self { points }
    }

    pub fn multiset_eq(&self, other: &Self) -> bool {
        self.canonical() == other.canonical()
    }

    /// Multiset equality of `(dim, birth, death)` ignoring attribution.
    pub fn coords_eq(&self, other: &Self) -> bool {
        let key = |d: &Self| {
            let mut v: Vec<(usize, u64, u64)> =
                d.points.iter().map(|p| (p.dim, p.birth.to_bits(), p.death.to_bits())).collect();
            v.sort_unstable();
            v
        };
        key(self) == key(other)
    }
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    time: f64,
    simplex: Simplex,
    /// Local indices of the endpoints for edges.
    ends: (usize, usize),
}

/// Filtration order: by time, nodes before edges, then by id.
fn filtration_order(complex: &Complex) -> Result<(Vec<Entry>, Vec<usize>)> {
    let max_id = complex.nodes.iter().map(|&(id, _)| id + 1).max().unwrap_or(0);
    let mut local = vec![usize::MAX; max_id];
    for (i, &(id, time)) in complex.nodes.iter().enumerate() {
        if !time.is_finite() {
            return Err(Error::Precondition(format!("node {id} has non-finite time")));
        }
        if local[id] != usize::MAX {
            return Err(Error::Precondition(format!("node {id} listed twice")));
        }
        local[id] = i;
    }
    let mut entries: Vec<Entry> = complex
        .nodes
        .iter()
        .map(|&(id, time)| Entry { time, simplex: Simplex::Node(id), ends: (0, 0) })
        .collect();
    for e in &complex.edges {
        let lookup = |n: usize| local.get(n).copied().filter(|&l| l != usize::MAX);
        let (Some(lu), Some(lv)) = (lookup(e.u), lookup(e.v)) else {
            return Err(Error::Precondition(format!("edge {} has an endpoint outside the complex", e.id)));
        };
        if !(e.time >= complex.nodes[lu].1 && e.time >= complex.nodes[lv].1) {
            return Err(Error::Precondition(format!(
                "edge {} enters at {} before one of its endpoints",
                e.id, e.time
            )));
        }
        entries.push(Entry { time: e.time, simplex: Simplex::Edge(e.id), ends: (lu, lv) });
    }
    entries.sort_by(|a, b| {
        a.time
            .total_cmp(&b.time)
            .then(a.simplex.dim().cmp(&b.simplex.dim()))
            .then(a.simplex.cmp(&b.simplex))
    });
    // rank of every node in the total order; smaller rank = elder
    let mut rank = vec![0; complex.nodes.len()];
    for (pos, entry) in entries.iter().enumerate() {
        if let Simplex::Node(id) = entry.simplex {
            rank[local[id]] = pos;
        }
    }
    Ok((entries, rank))
}

/// Persistence diagram of a filtered graph via union-find and the elder rule.
pub fn compute_ph(complex: &Complex) -> Result<PersistenceDiagram> {
    let (entries, rank) = filtration_order(complex)?;
    let n = complex.nodes.len();
    let mut uf = UnionFind::new(n);
    // oldest node of each component, keyed by root
    let mut oldest: Vec<usize> = (0..n).collect();
    let mut points = Vec::with_capacity(complex.num_simplices());
    for entry in &entries {
        let Simplex::Edge(_) = entry.simplex else { continue };
        let (a, b) = (uf.find(entry.ends.0), uf.find(entry.ends.1));
        if a == b {
            points.push(PersistencePoint {
                birth: entry.time,
                death: ESSENTIAL_DEATH,
                dim: 1,
                creator: entry.simplex,
                killer: None,
            });
            continue;
        }
        let (elder, younger) = if rank[oldest[a]] < rank[oldest[b]] {
            (oldest[a], oldest[b])
        } else {
            (oldest[b], oldest[a])
        };
        let (id, birth) = complex.nodes[younger];
        points.push(PersistencePoint {
            birth,
            death: entry.time,
            dim: 0,
            creator: Simplex::Node(id),
            killer: Some(entry.simplex),
        });
        uf.union(a, b);
        let root = uf.find(a);
        oldest[root] = elder;
    }
    for i in 0..n {
        if uf.find(i) == i {
            let (id, birth) = complex.nodes[oldest[i]];
            points.push(PersistencePoint {
                birth,
                death: ESSENTIAL_DEATH,
                dim: 0,
                creator: Simplex::Node(id),
                killer: None,
            });
        }
    }
    Ok(PersistenceDiagram { points })
}

/// Reference implementation: column reduction of the boundary matrix over
/// GF(2), with columns stored as 64-bit masks.
pub fn compute_ph_oracle(complex: &Complex) -> Result<PersistenceDiagram> {
    if complex.num_simplices() > ORACLE_MAX_SIMPLICES {
        return Err(Error::SizeCap(format!(
            "{} simplices exceeds the oracle cap of {ORACLE_MAX_SIMPLICES}",
            complex.num_simplices()
        )));
    }
    let (entries, _) = filtration_order(complex)?;
    let mut position_of_local = vec![0usize; complex.nodes.len()];
    for (pos, entry) in entries.iter().enumerate() {
        if let Simplex::Node(id) = entry.simplex {
            let local = complex.nodes.iter().position(|&(n, _)| n == id).expect("node present");
            position_of_local[local] = pos;
        }
    }
    let m = entries.len();
    let mut columns = vec![0u64; m];
    for (j, entry) in entries.iter().enumerate() {
        if let Simplex::Edge(_) = entry.simplex {
            columns[j] = (1u64 << position_of_local[entry.ends.0]) | (1u64 << position_of_local[entry.ends.1]);
        }
    }
    // pivot_owner[row] = column whose lowest one sits in `row`
    let mut pivot_owner: Vec<Option<usize>> = vec![None; m];
    let mut paired = vec![false; m];
    let mut points = Vec::new();
    for j in 0..m {
        while columns[j] != 0 {
            let low = 63 - columns[j].leading_zeros() as usize;
            match pivot_owner[low] {
                Some(k) => columns[j] ^= columns[k],
                None => {
                    pivot_owner[low] = Some(j);
                    break;
                }
            }
        }
        if columns[j] != 0 {
            let low = 63 - columns[j].leading_zeros() as usize;
            paired[low] = true;
            paired[j] = true;
            points.push(PersistencePoint {
                birth: entries[low].time,
                death: entries[j].time,
                dim: entries[low].simplex.dim(),
                creator: entries[low].simplex,
                killer: Some(entries[j].simplex),
            });
        }
    }
    for (j, entry) in entries.iter().enumerate() {
        if !paired[j] {
            points.push(PersistencePoint {
                birth: entry.time,
                death: ESSENTIAL_DEATH,
                dim: entry.simplex.dim(),
                creator: entry.simplex,
                killer: None,
            });
        }
    }
    Ok(PersistenceDiagram { points })
}

/// `(b0, b1)` of the graph on the nodes flagged in `present` and the given
/// edges, whose endpoints must be present.
pub fn betti_numbers(present: &[bool], edges: &[(usize, usize)]) -> (usize, usize) {
    let mut uf = UnionFind::new(present.len());
    let mut independent = 0;
    for &(u, v) in edges {
        if uf.union(u, v) {
            independent += 1;
        }
    }
    let nodes = present.iter().filter(|&&p| p).count();
    let b0 = nodes - independent;
    let b1 = edges.len() - independent;
    (b0, b1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{ComplexEdge, FilteredGraph};

    fn complex(nodes: &[f64], edges: &[(usize, usize, f64)]) -> Complex {
        Complex {
            nodes: nodes.iter().copied().enumerate().collect(),
            edges: edges
                .iter()
                .enumerate()
                .map(|(id, &(u, v, time))| ComplexEdge { id, u, v, time })
                .collect(),
        }
    }

    fn pt(birth: f64, death: f64, dim: usize, creator: Simplex, killer: Option<Simplex>) -> PersistencePoint {
        PersistencePoint { birth, death, dim, creator, killer }
    }

    #[test]
    fn single_node() {
        let d = compute_ph(&complex(&[0.1], &[])).unwrap();
        assert_eq!(d.points, vec![pt(0.1, 1.0, 0, Simplex::Node(0), None)]);
    }

    #[test]
    fn two_nodes_one_edge() {
        let c = complex(&[0.1, 0.3], &[(0, 1, 0.6)]);
        let d = compute_ph(&c).unwrap();
        let expected = PersistenceDiagram::new(vec![
            pt(0.1, 1.0, 0, Simplex::Node(0), None),
            pt(0.3, 0.6, 0, Simplex::Node(1), Some(Simplex::Edge(0))),
        ]);
        assert!(d.multiset_eq(&expected));
        assert!(d.multiset_eq(&compute_ph_oracle(&c).unwrap()));
    }

    #[test]
    fn triangle() {
        let c = complex(&[0.1, 0.2, 0.3], &[(0, 1, 0.3), (1, 2, 0.3), (0, 2, 0.4)]);
        let d = compute_ph(&c).unwrap();
        let expected = PersistenceDiagram::new(vec![
            pt(0.1, 1.0, 0, Simplex::Node(0), None),
            pt(0.2, 0.3, 0, Simplex::Node(1), Some(Simplex::Edge(0))),
            pt(0.3, 0.3, 0, Simplex::Node(2), Some(Simplex::Edge(1))),
            pt(0.4, 1.0, 1, Simplex::Edge(2), None),
        ]);
        assert!(d.multiset_eq(&expected), "{d:?}");
        assert!(d.multiset_eq(&compute_ph_oracle(&c).unwrap()));
    }

    #[test]
    fn four_cycle_oracle() {
        let c = complex(&[0.0; 4], &[(0, 1, 0.1), (1, 2, 0.2), (2, 3, 0.3), (0, 3, 0.4)]);
        let d = compute_ph_oracle(&c).unwrap();
        let ones: Vec<_> = d.dim(1).copied().collect();
        assert_eq!(ones, vec![pt(0.4, 1.0, 1, Simplex::Edge(3), None)]);
        assert!(d.multiset_eq(&compute_ph(&c).unwrap()));
    }

    #[test]
    fn empty_complex() {
        assert!(compute_ph_oracle(&Complex::default()).unwrap().is_empty());
        assert!(compute_ph(&Complex::default()).unwrap().is_empty());
    }

    #[test]
    fn oracle_refuses_large_complexes() {
        let c = complex(&[0.0; 65], &[]);
        assert!(matches!(compute_ph_oracle(&c), Err(Error::SizeCap(_))));
    }

    #[test]
    fn inconsistent_times_rejected() {
        let c = complex(&[0.5, 0.1], &[(0, 1, 0.2)]);
        assert!(matches!(compute_ph(&c), Err(Error::Precondition(_))));
        let dangling = Complex {
            nodes: vec![(0, 0.0)],
            edges: vec![ComplexEdge { id: 0, u: 0, v: 4, time: 0.5 }],
        };
        assert!(compute_ph(&dangling).is_err());
    }

    #[test]
    fn elder_tie_keeps_smaller_id() {
        let c = complex(&[0.2, 0.2], &[(0, 1, 0.5)]);
        let d = compute_ph(&c).unwrap();
        let finite: Vec<_> = d.points.iter().filter(|p| !p.is_essential()).collect();
        assert_eq!(finite[0].creator, Simplex::Node(1));
    }

    #[test]
    fn betti_examples() {
        assert_eq!(betti_numbers(&[true; 5], &[]), (5, 0));
        let mut grid = Vec::new();
        for r in 0..3 {
            for c in 0..3 {
                let i = r * 3 + c;
                if c < 2 {
                    grid.push((i, i + 1));
                }
                if r < 2 {
                    grid.push((i, i + 3));
                }
            }
        }
        assert_eq!(grid.len(), 12);
        assert_eq!(betti_numbers(&[true; 9], &grid), (1, 4));
        let house = [(0, 1), (1, 2), (2, 3), (0, 3), (0, 4), (1, 4)];
        assert_eq!(betti_numbers(&[true; 5], &house), (1, 2));
    }

    #[test]
    fn betti_at_end_matches_diagram() {
        let fg = FilteredGraph::from_times(
            5,
            vec![(0, 1), (1, 2), (0, 2), (3, 4)],
            vec![0.1, 0.2, 0.3, 0.4, 0.5],
            vec![0.3, 0.35, 0.6, 0.7],
        )
        .unwrap();
        let d = compute_ph(&fg.complex()).unwrap();
        let (b0, b1) = fg.betti_at(1.0);
        assert_eq!((b0, b1), (2, 1));
        assert_eq!(d.essential_count(0), b0);
        assert_eq!(d.dim(1).count(), b1);
    }
}
