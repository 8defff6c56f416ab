//! Rational-hat structure elements and the learnable lower bound on the
//! topological discrepancy between two families of diagrams.
//!
//! A structure element with center `c` and radius `r` maps a diagram to
//!
//! ```text
//! phi(D) = sum over x in D of  1/(1 + |x - c|) - 1/(1 + ||r| - |x - c||)
//! ```
//!
//! Dividing by a normalisation constant `C` gives the Lipschitz features
//! `psi = phi / C`. For each of the `k` elements the bound compares the mean
//! feature of the two families; the per-element gaps are combined by two
//! attention heads that approximate the sum of the two largest gaps.

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;

use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::persistence::PersistenceDiagram;

pub const DEFAULT_ELEMENTS: usize = 8;
pub const DEFAULT_RADIUS: f64 = 0.25;
pub const HEAD_TEMPERATURE: f64 = 0.1;
/// Normalisation used while training.
pub const TRAINING_NORMALIZATION: f64 = 2.0;

/// Derivatives of one point's contribution to a structure element.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PointHatGrad {
    pub point: [f64; 2],
    pub center: [f64; 2],
    pub radius: f64,
    /// Encodes which smooth piece the evaluation lies on.
    pub branch: u8,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Value and gradient of `1/(1+rho) - 1/(1+||r| - rho|)` with `rho = |x - c|`.
/// At `rho = 0` and `rho = |r|` the subgradient 0 is used for the kinked term.
pub fn point_hat_and_grad(x: [f64; 2], c: [f64; 2], r: f64) -> (f64, PointHatGrad) {
    let dx = [x[0] - c[0], x[1] - c[1]];
    let rho = dx[0].hypot(dx[1]);
    let gap = r.abs() - rho;
    let value = 1.0 / (1.0 + rho) - 1.0 / (1.0 + gap.abs());
    let gap_sign = sign(gap);
    let d_rho = -1.0 / (1.0 + rho).powi(2) - gap_sign / (1.0 + gap.abs()).powi(2);
    let d_gap = gap_sign / (1.0 + gap.abs()).powi(2);
    let dir = if rho > 0.0 { [dx[0] / rho, dx[1] / rho] } else { [0.0, 0.0] };
    let branch = (rho > 0.0) as u8 * 9 + (gap_sign + 1.0) as u8 * 3 + (sign(r) + 1.0) as u8;
    let grad = PointHatGrad {
        point: [d_rho * dir[0], d_rho * dir[1]],
        center: [-d_rho * dir[0], -d_rho * dir[1]],
        radius: d_gap * sign(r),
        branch,
    };
    (value, grad)
}

/// Structure element value on a set of `(birth, death)` points.
pub fn rational_hat(points: &[(f64, f64)], center: [f64; 2], radius: f64) -> f64 {
    points.iter().map(|&(b, d)| point_hat_and_grad([b, d], center, radius).0).sum()
}

#[derive(Clone, Debug, PartialEq)]
pub struct RationalHatGrad {
    pub points: Vec<[f64; 2]>,
    pub center: [f64; 2],
    pub radius: f64,
}

pub fn rational_hat_grad(points: &[(f64, f64)], center: [f64; 2], radius: f64) -> RationalHatGrad {
    let mut out = RationalHatGrad { points: Vec::with_capacity(points.len()), center: [0.0; 2], radius: 0.0 };
    for &(b, d) in points {
        let (_, g) = point_hat_and_grad([b, d], center, radius);
        out.points.push(g.point);
        out.center[0] += g.center[0];
        out.center[1] += g.center[1];
        out.radius += g.radius;
    }
    out
}

/// How the normalisation constant `C` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Normalization {
    Constant(f64),
    /// `C = 2 * n_max`, with `n_max` the largest diagram in the batch.
    PerBatch,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Aggregation {
    /// Two softmax heads. The second head sees the gaps scaled by `1 - a1`,
    /// so at low temperature the pair picks the two largest gaps; every gap
    /// gets total weight at most 1, which keeps the bound below the top-2 sum.
    Attention { temperature: f64 },
    HardMax,
    HardTop2,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ElementSet {
    pub centers: Vec<[f64; 2]>,
    pub radii: Vec<f64>,
}

impl ElementSet {
    pub fn random<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        Self {
            centers: (0..k).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect(),
            radii: vec![DEFAULT_RADIUS; k],
        }
    }

    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    pub fn centers_tensor(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), 2), |(i, j)| self.centers[i][j])
    }

    pub fn radii_tensor(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.len(), 1), |(i, _)| self.radii[i])
    }
}

/// Structure elements for dimensions 0 and 1, attention heads and the
/// dimension-0 weight.
#[derive(Clone, Debug, PartialEq)]
pub struct StructureElementBank {
    pub elements: [ElementSet; 2],
    /// `attention[dim][head]`: additive per-element biases.
    pub attention: [[Vec<f64>; 2]; 2],
    pub lambda0: f64,
    pub normalization: Normalization,
    pub aggregation: Aggregation,
}

impl StructureElementBank {
    pub fn new<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Self {
        let e0 = ElementSet::random(k, rng);
        let e1 = ElementSet::random(k, rng);
        Self {
            elements: [e0, e1],
            attention: [[vec![0.0; k], vec![0.0; k]], [vec![0.0; k], vec![0.0; k]]],
            lambda0: 1.0,
            normalization: Normalization::Constant(TRAINING_NORMALIZATION),
            aggregation: Aggregation::Attention { temperature: HEAD_TEMPERATURE },
        }
    }

    pub fn k(&self) -> usize {
        self.elements[0].len()
    }

    pub fn on_tape(&self, tape: &mut Tape) -> BankVars {
        let row = |tape: &mut Tape, v: &[f64]| tape.leaf(Array2::from_shape_vec((1, v.len()), v.to_vec()).expect("row"));
        BankVars {
            centers: [
                tape.leaf(self.elements[0].centers_tensor()),
                tape.leaf(self.elements[1].centers_tensor()),
            ],
            radii: [tape.leaf(self.elements[0].radii_tensor()), tape.leaf(self.elements[1].radii_tensor())],
            heads: [
                [row(tape, &self.attention[0][0]), row(tape, &self.attention[0][1])],
                [row(tape, &self.attention[1][0]), row(tape, &self.attention[1][1])],
            ],
            lambda0: tape.scalar_leaf(self.lambda0),
        }
    }
}

/// Tape handles for the learnable parts of a bank.
#[derive(Clone, Copy, Debug)]
pub struct BankVars {
    pub centers: [Var; 2],
    pub radii: [Var; 2],
    pub heads: [[Var; 2]; 2],
    pub lambda0: Var,
}

/// Points of a family of diagrams of one dimension, on a tape.
#[derive(Clone, Debug)]
pub struct DiagramBatch {
    /// `m x 2` birth/death coordinates.
    pub points: Var,
    /// Diagram index of every point.
    pub segments: Rc<[usize]>,
    pub count: usize,
}

impl DiagramBatch {
    /// Records the points of one dimension of `diagrams` as a constant.
    pub fn constant(tape: &mut Tape, diagrams: &[PersistenceDiagram], dim: usize) -> Self {
        let mut coords = Vec::new();
        let mut segments = Vec::new();
        for (g, d) in diagrams.iter().enumerate() {
            for (b, de) in d.coords(dim) {
                coords.extend([b, de]);
                segments.push(g);
            }
        }
        let points = tape.leaf(Array2::from_shape_vec((segments.len(), 2), coords).expect("points"));
        Self { points, segments: segments.into(), count: diagrams.len() }
    }
}

/// `count x k` matrix of `psi_i(D) = phi_i(D) / C`.
pub fn structure_features(tape: &mut Tape, batch: &DiagramBatch, centers: Var, radii: Var, c: f64) -> Var {
    let phi = tape.rational_hat(batch.points, batch.segments.clone(), batch.count, centers, radii);
    tape.scale(phi, 1.0 / c)
}

/// Aggregates the `1 x k` gaps `m` into a scalar.
pub fn aggregate(tape: &mut Tape, gaps: Var, heads: [Var; 2], aggregation: Aggregation) -> Var {
    match aggregation {
        Aggregation::Attention { temperature } => {
            let inv_t = 1.0 / temperature;
            let z1 = tape.add(gaps, heads[0]);
            let z1 = tape.scale(z1, inv_t);
            let a1 = tape.softmax(z1);
            let w1 = tape.mul(a1, gaps);
            let out1 = tape.sum(w1);

            // 1 - a1, computed as the sum of the other weights so that it
            // stays accurate when a1 saturates.
            let k = tape.value(gaps).ncols();
            let others = tape.leaf(Array2::from_shape_fn((k, k), |(i, j)| if i == j { 0.0 } else { 1.0 }));
            let rest = tape.matmul(a1, others);
            let masked = tape.mul(gaps, rest);
            let z2 = tape.add(masked, heads[1]);
            let z2 = tape.scale(z2, inv_t);
            let a2 = tape.softmax(z2);
            let w2 = tape.mul(a2, masked);
            let out2 = tape.sum(w2);
            tape.add(out1, out2)
        }
        Aggregation::HardMax | Aggregation::HardTop2 => {
            let take = if aggregation == Aggregation::HardMax { 1 } else { 2 };
            let values = tape.value(gaps).clone();
            let mut order: Vec<usize> = (0..values.ncols()).collect();
            order.sort_by(|&a, &b| values[[0, b]].total_cmp(&values[[0, a]]).then(a.cmp(&b)));
            let mut mask = Array2::zeros(values.raw_dim());
            let mut choice = 0u64;
            for &j in order.iter().take(take) {
                mask[[0, j]] = 1.0;
                choice = choice.wrapping_mul(131).wrapping_add(j as u64 + 1);
            }
            tape.note_branch(choice);
            let mask = tape.leaf(mask);
            let picked = tape.mul(gaps, mask);
            tape.sum(picked)
        }
    }
}

/// Per-dimension gap vector `|mean psi(X) - mean psi(eps)|`.
pub fn feature_gaps(tape: &mut Tape, psi_x: Var, psi_eps: Var) -> Var {
    let mx = tape.mean_rows(psi_x);
    let me = tape.mean_rows(psi_eps);
    let diff = tape.sub(mx, me);
    tape.abs(diff)
}

/// Lower bound from precomputed feature matrices `[dim0, dim1]` of both families.
pub fn lower_bound_from_features(
    tape: &mut Tape,
    bank: &BankVars,
    psi_x: [Var; 2],
    psi_eps: [Var; 2],
    aggregation: Aggregation,
) -> Var {
    let mut per_dim = [psi_x[0]; 2];
    for d in 0..2 {
        let gaps = feature_gaps(tape, psi_x[d], psi_eps[d]);
        per_dim[d] = aggregate(tape, gaps, bank.heads[d], aggregation);
    }
    let weighted = tape.mul_scalar_var(per_dim[0], bank.lambda0);
    tape.add(weighted, per_dim[1])
}

/// `C = 2 * n_max` over both families.
pub fn per_batch_normalization(ps: &[PersistenceDiagram], qs: &[PersistenceDiagram]) -> f64 {
    let n_max = ps.iter().chain(qs).map(PersistenceDiagram::len).max().unwrap_or(0).max(1);
    2.0 * n_max as f64
}

/// Records the full lower bound for two families of diagrams on `tape`.
pub fn lower_bound_on_tape(
    tape: &mut Tape,
    bank: &StructureElementBank,
    vars: &BankVars,
    ps: &[PersistenceDiagram],
    qs: &[PersistenceDiagram],
) -> Result<Var> {
    if ps.is_empty() || qs.is_empty() {
        return Err(Error::Domain("lower bound needs non-empty batches".into()));
    }
    let c = match bank.normalization {
        Normalization::Constant(c) if c > 0.0 => c,
        Normalization::Constant(c) => return Err(Error::Domain(format!("normalisation {c} must be positive"))),
        Normalization::PerBatch => per_batch_normalization(ps, qs),
    };
    let mut psi_x = [vars.lambda0; 2];
    let mut psi_eps = [vars.lambda0; 2];
    for d in 0..2 {
        let bx = DiagramBatch::constant(tape, ps, d);
        let be = DiagramBatch::constant(tape, qs, d);
        psi_x[d] = structure_features(tape, &bx, vars.centers[d], vars.radii[d], c);
        psi_eps[d] = structure_features(tape, &be, vars.centers[d], vars.radii[d], c);
    }
    Ok(lower_bound_from_features(tape, vars, psi_x, psi_eps, bank.aggregation))
}

/// Value of the lower bound on the topological discrepancy between the
/// empirical distributions of `ps` and `qs`.
pub fn lower_bound(ps: &[PersistenceDiagram], qs: &[PersistenceDiagram], bank: &StructureElementBank) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = bank.on_tape(&mut tape);
    let out = lower_bound_on_tape(&mut tape, bank, &vars, ps, qs)?;
    Ok(tape.scalar(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::gradcheck;
    use crate::graphs::Simplex;
    use crate::persistence::PersistencePoint;
    use crate::rng::rng_from_seed;

    fn diagram(points: &[(f64, f64, usize)]) -> PersistenceDiagram {
        PersistenceDiagram::new(
            points
                .iter()
                .map(|&(birth, death, dim)| PersistencePoint {
                    birth,
                    death,
                    dim,
                    creator: Simplex::Node(0),
                    killer: None,
                })
                .collect(),
        )
    }

    #[test]
    fn empty_diagram_is_zero() {
        assert_eq!(rational_hat(&[], [0.3, 0.4], 0.2), 0.0);
    }

    #[test]
    fn point_at_center() {
        let r = 0.3;
        let v = rational_hat(&[(0.2, 0.7)], [0.2, 0.7], r);
        assert!((v - (1.0 - 1.0 / (1.0 + r))).abs() < 1e-15);
    }

    #[test]
    fn point_on_radius() {
        // |x - c| = 0.5 = |r|
        let r = -0.5;
        let v = rational_hat(&[(0.3, 0.4)], [0.0, 0.0], r);
        assert!((v - (1.0 / 1.5 - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn far_points_have_small_gradient() {
        let g = rational_hat_grad(&[(1e4, 2e4)], [0.0, 0.0], 0.3);
        assert!(g.points[0][0].hypot(g.points[0][1]) < 1e-8);
    }

    fn hat_fd(points: &[(f64, f64)], c: [f64; 2], r: f64) -> RationalHatGrad {
        let h = 1e-5;
        let f = |p: &[(f64, f64)], c: [f64; 2], r: f64| rational_hat(p, c, r);
        let mut out = RationalHatGrad { points: Vec::new(), center: [0.0; 2], radius: 0.0 };
        for i in 0..points.len() {
            let mut g = [0.0; 2];
            for (j, gj) in g.iter_mut().enumerate() {
                let mut plus = points.to_vec();
                let mut minus = points.to_vec();
                if j == 0 {
                    plus[i].0 += h;
                    minus[i].0 -= h;
                } else {
                    plus[i].1 += h;
                    minus[i].1 -= h;
                }
                *gj = (f(&plus, c, r) - f(&minus, c, r)) / (2.0 * h);
            }
            out.points.push(g);
        }
        for j in 0..2 {
            let mut cp = c;
            let mut cm = c;
            cp[j] += h;
            cm[j] -= h;
            out.center[j] = (f(points, cp, r) - f(points, cm, r)) / (2.0 * h);
        }
        out.radius = (f(points, c, r + h) - f(points, c, r - h)) / (2.0 * h);
        out
    }

    fn rel(a: f64, n: f64) -> f64 {
        (a - n).abs() / (a.abs() + n.abs()).max(1e-8)
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = rng_from_seed(21);
        for _ in 0..20 {
            let points: Vec<(f64, f64)> = (0..5)
                .map(|_| {
                    let a: f64 = rng.random();
                    let b: f64 = rng.random();
                    (a.min(b), a.max(b))
                })
                .collect();
            let c = [rng.random::<f64>(), rng.random::<f64>()];
            let r = rng.random_range(-0.6..0.6);
            let g = rational_hat_grad(&points, c, r);
            let n = hat_fd(&points, c, r);
            for (a, b) in g.points.iter().zip(&n.points) {
                assert!(rel(a[0], b[0]) < 1e-4 && rel(a[1], b[1]) < 1e-4);
            }
            assert!(rel(g.center[0], n.center[0]) < 1e-4);
            assert!(rel(g.center[1], n.center[1]) < 1e-4);
            assert!(rel(g.radius, n.radius) < 1e-4);
        }
    }

    #[test]
    fn radius_derivative_outside_ring() {
        // |x - c| = 0.5 > r = 0.2
        let (x, c, r) = ((0.3, 0.4), [0.0, 0.0], 0.2);
        let g = rational_hat_grad(&[x], c, r);
        let expected = -1.0 / (1.0 + (0.5 - 0.2f64)).powi(2);
        assert!((g.radius - expected).abs() < 1e-12);
        assert!(rel(g.radius, hat_fd(&[x], c, r).radius) < 1e-6);
    }

    #[test]
    fn identical_families_give_zero() {
        let mut rng = rng_from_seed(4);
        let bank = StructureElementBank::new(8, &mut rng);
        let ps = vec![diagram(&[(0.1, 0.6, 0), (0.2, 1.0, 1)]), diagram(&[(0.0, 0.3, 0)])];
        let qs = vec![ps[1].clone(), ps[0].clone()];
        assert_eq!(lower_bound(&ps, &qs, &bank).unwrap(), 0.0);
    }

    #[test]
    fn single_element_hard_max() {
        let mut rng = rng_from_seed(5);
        let mut bank = StructureElementBank::new(1, &mut rng);
        bank.aggregation = Aggregation::HardMax;
        bank.lambda0 = 1.0;
        let ps = vec![diagram(&[(0.1, 0.6, 0)]), diagram(&[(0.2, 0.9, 0), (0.3, 0.4, 0)])];
        let qs = vec![diagram(&[(0.5, 1.0, 0)])];
        let c = 2.0;
        let el = &bank.elements[0];
        let mean = |ds: &[PersistenceDiagram]| {
            ds.iter().map(|d| rational_hat(&d.coords(0), el.centers[0], el.radii[0]) / c).sum::<f64>()
                / ds.len() as f64
        };
        let expected = (mean(&ps) - mean(&qs)).abs();
        assert!((lower_bound(&ps, &qs, &bank).unwrap() - expected).abs() < 1e-15);
        bank.aggregation = Aggregation::HardTop2;
        assert!((lower_bound(&ps, &qs, &bank).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn soft_heads_approach_top2() {
        let mut tape = Tape::new();
        let gaps = tape.leaf(ndarray::array![[0.1, 0.9, 0.4, 0.85, 0.0]]);
        let zeros = Array2::zeros((1, 5));
        let h1 = tape.leaf(zeros.clone());
        let h2 = tape.leaf(zeros);
        let soft = aggregate(&mut tape, gaps, [h1, h2], Aggregation::Attention { temperature: 0.001 });
        let hard = aggregate(&mut tape, gaps, [h1, h2], Aggregation::HardTop2);
        assert!((tape.scalar(hard) - 1.75).abs() < 1e-15);
        assert!((tape.scalar(soft) - 1.75).abs() < 1e-6);
    }

    #[test]
    fn empty_batch_is_domain_error() {
        let bank = StructureElementBank::new(8, &mut rng_from_seed(1));
        assert!(matches!(lower_bound(&[], &[diagram(&[])], &bank), Err(Error::Domain(_))));
    }

    #[test]
    fn lower_bound_gradient_is_faithful() {
        let mut rng = rng_from_seed(8);
        let bank = StructureElementBank::new(4, &mut rng);
        let mut random_points = |n: usize| {
            (0..n)
                .map(|_| {
                    let a: f64 = rng.random();
                    let b: f64 = rng.random();
                    [a.min(b), a.max(b)]
                })
                .collect::<Vec<_>>()
        };
        let px = random_points(7);
        let pe = random_points(5);
        let to_tensor = |pts: &[[f64; 2]]| Array2::from_shape_fn((pts.len(), 2), |(i, j)| pts[i][j]);
        let head = |v: &[f64]| Array2::from_shape_vec((1, v.len()), v.to_vec()).unwrap();
        let params = vec![
            to_tensor(&px),
            to_tensor(&pe),
            bank.elements[0].centers_tensor(),
            bank.elements[0].radii_tensor(),
            head(&[0.05, -0.1, 0.2, 0.0]),
            head(&[0.0, 0.1, -0.05, 0.3]),
            Array2::from_elem((1, 1), 1.5),
        ];
        let seg_x: Rc<[usize]> = vec![0, 0, 1, 1, 1, 2, 2].into();
        let seg_e: Rc<[usize]> = vec![0, 1, 1, 2, 2].into();
        let report = gradcheck(&params, 1e-5, |tape, v| {
            let bx = DiagramBatch { points: v[0], segments: seg_x.clone(), count: 3 };
            let be = DiagramBatch { points: v[1], segments: seg_e.clone(), count: 3 };
            let fx = structure_features(tape, &bx, v[2], v[3], 2.0);
            let fe = structure_features(tape, &be, v[2], v[3], 2.0);
            let gaps = feature_gaps(tape, fx, fe);
            let agg = aggregate(tape, gaps, [v[4], v[5]], Aggregation::Attention { temperature: HEAD_TEMPERATURE });
            Ok(tape.mul_scalar_var(agg, v[6]))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
