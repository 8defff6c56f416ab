//! Distances between persistence diagrams and between empirical
//! distributions of diagrams.

use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

/// Largest diagram accepted by [`bottleneck_oracle`].
pub const ORACLE_MAX_POINTS: usize = 4;

/// How an unmatched point is charged for moving to the diagonal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum DiagonalConvention {
    /// Projection onto the nearest diagonal point `((b+d)/2, (b+d)/2)`,
    /// i.e. cost `(d - b) / 2` under the sup norm.
    #[default]
    Geometric,
    /// Projection onto `(d - b, d - b)` taken literally.
    Literal,
}

impl DiagonalConvention {
    pub const ALL: [DiagonalConvention; 2] = [DiagonalConvention::Geometric, DiagonalConvention::Literal];

    pub fn name(self) -> &'static str {
        match self {
            DiagonalConvention::Geometric => "geometric",
            DiagonalConvention::Literal => "literal",
        }
    }
}

pub type Point = (f64, f64);

pub fn linf(p: Point, q: Point) -> f64 {
    (p.0 - q.0).abs().max((p.1 - q.1).abs())
}

pub fn diagonal_cost(p: Point, convention: DiagonalConvention) -> f64 {
    match convention {
        DiagonalConvention::Geometric => (p.1 - p.0).abs() / 2.0,
        DiagonalConvention::Literal => {
            let z = p.1 - p.0;
            linf(p, (z, z))
        }
    }
}

/// Kuhn's augmenting-path matching on the bipartite graph whose left side
/// is `P ∪ diag(Q)` and right side is `Q ∪ diag(P)`.
struct Feasibility<'a> {
    p: &'a [Point],
    q: &'a [Point],
    p_diag: Vec<f64>,
    q_diag: Vec<f64>,
}

impl Feasibility<'_> {
    fn admissible(&self, left: usize, right: usize, eps: f64) -> bool {
        let (n, m) = (self.p.len(), self.q.len());
        match (left < n, right < m) {
            (true, true) => linf(self.p[left], self.q[right]) <= eps,
            (true, false) => right - m == left && self.p_diag[left] <= eps,
            (false, true) => left - n == right && self.q_diag[right] <= eps,
            (false, false) => true,
        }
    }

    fn perfect(&self, eps: f64) -> bool {
        let size = self.p.len() + self.q.len();
        let mut match_right = vec![usize::MAX; size];
        for left in 0..size {
            let mut visited = vec![false; size];
            if !self.augment(left, eps, &mut visited, &mut match_right) {
                return false;
            }
        }
        true
    }

    fn augment(&self, left: usize, eps: f64, visited: &mut [bool], match_right: &mut [usize]) -> bool {
        for right in 0..match_right.len() {
            if visited[right] || !self.admissible(left, right, eps) {
                continue;
            }
            visited[right] = true;
            if match_right[right] == usize::MAX || self.augment(match_right[right], eps, visited, match_right) {
                match_right[right] = left;
                return true;
            }
        }
        false
    }
}

/// Exact bottleneck distance between two point sets: binary search over the
/// finite set of candidate costs with a perfect-matching test at each one.
pub fn bottleneck_points(p: &[Point], q: &[Point], convention: DiagonalConvention) -> f64 {
    let feas = Feasibility {
        p,
        q,
        p_diag: p.iter().map(|&x| diagonal_cost(x, convention)).collect(),
        q_diag: q.iter().map(|&x| diagonal_cost(x, convention)).collect(),
    };
    let mut candidates: Vec<f64> = Vec::with_capacity(p.len() * q.len() + p.len() + q.len() + 1);
    candidates.push(0.0);
    candidates.extend(&feas.p_diag);
    candidates.extend(&feas.q_diag);
    for &a in p {
        for &b in q {
            candidates.push(linf(a, b));
        }
    }
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    // the largest candidate is always feasible
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if feas.perfect(candidates[mid]) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    candidates[lo]
}

pub fn bottleneck(p: &PersistenceDiagram, q: &PersistenceDiagram, dim: usize) -> f64 {
    bottleneck_with(p, q, dim, DiagonalConvention::Geometric)
}

pub fn bottleneck_with(
    p: &PersistenceDiagram,
    q: &PersistenceDiagram,
    dim: usize,
    convention: DiagonalConvention,
) -> f64 {
    bottleneck_points(&p.coords(dim), &q.coords(dim), convention)
}

/// Bottleneck distance by enumerating every partial matching.
pub fn bottleneck_oracle_points(p: &[Point], q: &[Point], convention: DiagonalConvention) -> Result<f64> {
    if p.len() > ORACLE_MAX_POINTS || q.len() > ORACLE_MAX_POINTS {
        return Err(Error::SizeCap(format!(
            "diagrams of size {} and {} exceed the oracle cap of {ORACLE_MAX_POINTS}",
            p.len(),
            q.len()
        )));
    }
    fn search(i: usize, p: &[Point], q: &[Point], used: &mut [bool], worst: f64, conv: DiagonalConvention) -> f64 {
        if i == p.len() {
            return q
                .iter()
                .zip(used.iter())
                .filter(|(_, &u)| !u)
                .map(|(&x, _)| diagonal_cost(x, conv))
                .fold(worst, f64::max);
        }
        let mut best = search(i + 1, p, q, used, worst.max(diagonal_cost(p[i], conv)), conv);
        for j in 0..q.len() {
            if !used[j] {
                used[j] = true;
                best = best.min(search(i + 1, p, q, used, worst.max(linf(p[i], q[j])), conv));
                used[j] = false;
            }
        }
        best
    }
    Ok(search(0, p, q, &mut vec![false; q.len()], 0.0, convention))
}

pub fn bottleneck_oracle(p: &PersistenceDiagram, q: &PersistenceDiagram, dim: usize) -> Result<f64> {
    bottleneck_oracle_points(&p.coords(dim), &q.coords(dim), DiagonalConvention::Geometric)
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian
/// method with row/column potentials). Returns the total cost and the
/// column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let n = cost.len();
    if n == 0 {
        return (0.0, Vec::new());
    }
    assert!(cost.iter().all(|row| row.len() == n), "hungarian needs a square matrix");
    // 1-based arrays; column 0 is a sentinel
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for row in 1..=n {
        owner[0] = row;
        let mut col0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[col0] = true;
            let r0 = owner[col0];
            let mut delta = f64::INFINITY;
            let mut col1 = 0;
            for col in 1..=n {
                if used[col] {
                    continue;
                }
                let reduced = cost[r0 - 1][col - 1] - u[r0] - v[col];
                if reduced < minv[col] {
                    minv[col] = reduced;
                    way[col] = col0;
                }
                if minv[col] < delta {
                    delta = minv[col];
                    col1 = col;
                }
            }
            for col in 0..=n {
                if used[col] {
                    u[owner[col]] += delta;
                    v[col] -= delta;
                } else {
                    minv[col] -= delta;
                }
            }
            col0 = col1;
            if owner[col0] == 0 {
                break;
            }
        }
        loop {
            let col1 = way[col0];
            owner[col0] = owner[col1];
            col0 = col1;
            if col0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0; n];
    for col in 1..=n {
        assignment[owner[col] - 1] = col - 1;
    }
    let total = assignment.iter().enumerate().map(|(r, &c)| cost[r][c]).sum();
    (total, assignment)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Optimal transport between uniform distributions on the rows and columns
/// of `cost`, returning the expected cost. Square matrices go through the
/// assignment solver; rectangular ones through successive shortest paths on
/// integer supplies `m/g` per row and `n/g` per column.
pub fn transport_uniform(cost: &[Vec<f64>]) -> Result<f64> {
    let n = cost.len();
    let m = cost.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        return Err(Error::Domain("transport needs non-empty marginals".into()));
    }
    if cost.iter().any(|row| row.len() != m) {
        return Err(Error::Precondition("ragged cost matrix".into()));
    }
    if n == m {
        return Ok(hungarian(cost).0 / n as f64);
    }
    let g = gcd(n, m);
    let (row_supply, col_demand) = ((m / g) as i64, (n / g) as i64);
    let total = (n * m / g) as f64;
    Ok(min_cost_transport(cost, row_supply, col_demand) / total)
}

/// Successive shortest paths with Johnson potentials on the complete
/// bipartite network source -> rows -> columns -> sink.
fn min_cost_transport(cost: &[Vec<f64>], row_supply: i64, col_demand: i64) -> f64 {
    let (n, m) = (cost.len(), cost[0].len());
    let source = n + m;
    let sink = source + 1;
    let nodes = sink + 1;
    #[derive(Clone, Copy)]
    struct Arc {
        to: usize,
        cap: i64,
        cost: f64,
    }
    let mut arcs: Vec<Arc> = Vec::new();
    let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |from: usize, to: usize, cap: i64, c: f64, arcs: &mut Vec<Arc>| {
        adjacency[from].push(arcs.len());
        arcs.push(Arc { to, cap, cost: c });
        adjacency[to].push(arcs.len());
        arcs.push(Arc { to: from, cap: 0, cost: -c });
    };
    for i in 0..n {
        add(source, i, row_supply, 0.0, &mut arcs);
        for j in 0..m {
            add(i, n + j, i64::MAX / 4, cost[i][j], &mut arcs);
        }
    }
    for j in 0..m {
        add(n + j, sink, col_demand, 0.0, &mut arcs);
    }
    let mut potential = vec![0.0; nodes];
    let mut remaining = row_supply * n as i64;
    let mut total = 0.0;
    while remaining > 0 {
        // dense Dijkstra on reduced costs
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev_arc = vec![usize::MAX; nodes];
        let mut done = vec![false; nodes];
        dist[source] = 0.0;
        loop {
            let mut best = usize::MAX;
            for x in 0..nodes {
                if !done[x] && dist[x].is_finite() && (best == usize::MAX || dist[x] < dist[best]) {
                    best = x;
                }
            }
            if best == usize::MAX {
                break;
            }
            done[best] = true;
            for &a in &adjacency[best] {
                let arc = arcs[a];
                if arc.cap <= 0 {
                    continue;
                }
                let reduced = (arc.cost + potential[best] - potential[arc.to]).max(0.0);
                if dist[best] + reduced < dist[arc.to] {
                    dist[arc.to] = dist[best] + reduced;
                    prev_arc[arc.to] = a;
                }
            }
        }
        debug_assert!(dist[sink].is_finite(), "transport network must stay feasible");
        for x in 0..nodes {
            if dist[x].is_finite() {
                potential[x] += dist[x];
            }
        }
        let mut push = remaining;
        let mut x = sink;
        while x != source {
            let a = prev_arc[x];
            push = push.min(arcs[a].cap);
            x = arcs[a ^ 1].to;
        }
        let mut x = sink;
        while x != source {
            let a = prev_arc[x];
            arcs[a].cap -= push;
            arcs[a ^ 1].cap += push;
            total += push as f64 * arcs[a].cost;
            x = arcs[a ^ 1].to;
        }
        remaining -= push;
    }
    total
}

/// Ground cost between two diagrams: a weighted sum of per-dimension
/// bottleneck distances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GroundCost {
    pub dim_weights: [f64; 2],
    pub convention: DiagonalConvention,
}

impl Default for GroundCost {
    fn default() -> Self {
        Self { dim_weights: [1.0, 1.0], convention: DiagonalConvention::Geometric }
    }
}

impl GroundCost {
    pub fn weighted(lambda0: f64) -> Self {
        Self { dim_weights: [lambda0, 1.0], ..Self::default() }
    }

    pub fn eval(&self, p: &PersistenceDiagram, q: &PersistenceDiagram) -> f64 {
        (0..2)
            .filter(|&d| self.dim_weights[d] != 0.0)
            .map(|d| self.dim_weights[d] * bottleneck_with(p, q, d, self.convention))
            .sum()
    }
}

pub fn cost_matrix(ps: &[PersistenceDiagram], qs: &[PersistenceDiagram], ground: &GroundCost) -> Vec<Vec<f64>> {
    ps.iter().map(|p| qs.iter().map(|q| ground.eval(p, q)).collect()).collect()
}

/// 1-Wasserstein distance between the uniform empirical distributions on
/// `ps` and `qs` under the given ground cost.
pub fn dtopo_exact(ps: &[PersistenceDiagram], qs: &[PersistenceDiagram], ground: &GroundCost) -> Result<f64> {
    if ps.is_empty() || qs.is_empty() {
        return Err(Error::Domain("dtopo needs non-empty diagram lists".into()));
    }
    transport_uniform(&cost_matrix(ps, qs, ground))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    const G: DiagonalConvention = DiagonalConvention::Geometric;

    #[test]
    fn identity_is_zero() {
        let p = [(0.1, 0.5), (0.2, 0.9), (0.3, 0.3)];
        assert_eq!(bottleneck_points(&p, &p, G), 0.0);
        assert_eq!(bottleneck_points(&p, &p, DiagonalConvention::Literal), 0.0);
    }

    #[test]
    fn single_point_to_empty() {
        assert!((bottleneck_points(&[(0.2, 0.8)], &[], G) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn single_point_pair() {
        let d = bottleneck_points(&[(0.1, 0.9)], &[(0.2, 0.7)], G);
        assert!((d - 0.2).abs() < 1e-15);
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(bottleneck_oracle_points(&[], &[], G).unwrap(), 0.0);
        let d = bottleneck_oracle_points(&[(0.0, 1.0), (0.0, 1.0)], &[(0.0, 1.0)], G).unwrap();
        assert_eq!(d, 0.5);
        assert!(bottleneck_oracle_points(&[(0.0, 1.0); 5], &[], G).is_err());
    }

    #[test]
    fn literal_convention_cost() {
        // (0, 1) projects to (1, 1)
        assert_eq!(diagonal_cost((0.0, 1.0), DiagonalConvention::Literal), 1.0);
        assert_eq!(diagonal_cost((0.5, 1.0), DiagonalConvention::Literal), 0.5);
    }

    #[test]
    fn matches_oracle_on_random_pairs() {
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            let gen = |rng: &mut crate::rng::Rng| {
                let k = rng.random_range(0..=4);
                (0..k)
                    .map(|_| {
                        let a: f64 = rng.random();
                        let b: f64 = rng.random();
                        (a.min(b), a.max(b))
                    })
                    .collect::<Vec<_>>()
            };
            let p = gen(&mut rng);
            let q = gen(&mut rng);
            for conv in DiagonalConvention::ALL {
                let fast = bottleneck_points(&p, &q, conv);
                let slow = bottleneck_oracle_points(&p, &q, conv).unwrap();
                assert!((fast - slow).abs() <= 1e-12, "{p:?} {q:?} {fast} {slow}");
            }
        }
    }

    fn permutations(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for perm in permutations(n - 1) {
            for pos in 0..=perm.len() {
                let mut p = perm.clone();
                p.insert(pos, n - 1);
                out.push(p);
            }
        }
        out
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let mut rng = rng_from_seed(2);
        for n in 1..=5 {
            for _ in 0..20 {
                let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
                let brute = permutations(n)
                    .iter()
                    .map(|p| p.iter().enumerate().map(|(r, &c)| cost[r][c]).sum::<f64>())
                    .fold(f64::INFINITY, f64::min);
                let (total, assignment) = hungarian(&cost);
                assert!((total - brute).abs() < 1e-12);
                let mut seen = assignment.clone();
                seen.sort_unstable();
                assert_eq!(seen, (0..n).collect::<Vec<_>>());
            }
        }
    }

    /// Replicates rows and columns up to their least common multiple and
    /// solves the square assignment problem.
    fn replicated_transport(cost: &[Vec<f64>]) -> f64 {
        let (n, m) = (cost.len(), cost[0].len());
        let l = n * m / gcd(n, m);
        let big: Vec<Vec<f64>> = (0..l).map(|r| (0..l).map(|c| cost[r / (l / n)][c / (l / m)]).collect()).collect();
        hungarian(&big).0 / l as f64
    }

    #[test]
    fn rectangular_transport_matches_replication() {
        let mut rng = rng_from_seed(3);
        for _ in 0..60 {
            let n = rng.random_range(1..=5);
            let m = rng.random_range(1..=5);
            let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.random()).collect()).collect();
            let fast = transport_uniform(&cost).unwrap();
            let slow = replicated_transport(&cost);
            assert!((fast - slow).abs() < 1e-12, "{n}x{m}: {fast} vs {slow}");
        }
    }

    #[test]
    fn transport_rejects_empty() {
        assert!(transport_uniform(&[]).is_err());
        assert!(dtopo_exact(&[], &[PersistenceDiagram::default()], &GroundCost::default()).is_err());
    }
}
