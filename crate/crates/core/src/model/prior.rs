//! Two-component Gaussian prior on edge scores. Pulling scores towards two
//! separated modes keeps the filtration from collapsing to a single value.

use ndarray::Array2;

use super::{Adam, ParamStore, MIN_PRIOR_WIDTH};
use crate::diff::{Tape, Var};
use crate::error::{Error, Result};
use crate::graphs::FilteredGraph;

const LOG_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// The fixed part of the mixture: weight of the first component and the
/// two means.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixtureShape {
    pub w: f64,
    pub mu1: f64,
    pub mu2: f64,
}

impl Default for MixtureShape {
    fn default() -> Self {
        Self { w: 0.5, mu1: 0.25, mu2: 0.75 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MixturePrior {
    pub shape: MixtureShape,
    pub r1: f64,
    pub r2: f64,
}

impl Default for MixturePrior {
    fn default() -> Self {
        Self { shape: MixtureShape::default(), r1: 0.25, r2: 0.25 }
    }
}

impl MixturePrior {
    pub fn validate(&self) -> Result<()> {
        let MixtureShape { w, mu1, mu2 } = self.shape;
        if !(w > 0.0 && w < 1.0) {
            return Err(Error::Domain(format!("mixture weight {w} outside (0, 1)")));
        }
        if !(self.r1 > 0.0 && self.r2 > 0.0) {
            return Err(Error::Domain(format!("mixture widths must be positive, got {} and {}", self.r1, self.r2)));
        }
        if mu1 == mu2 {
            return Err(Error::Domain("mixture means coincide".into()));
        }
        Ok(())
    }
}

/// Derivatives of one edge's negative log-likelihood.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct EdgeNllGrad {
    pub score: f64,
    pub r1: f64,
    pub r2: f64,
}

/// `-ln(w N(s; mu1, r1) + (1 - w) N(s; mu2, r2))` and its gradient, computed
/// through log-sum-exp so far-out scores do not underflow.
pub fn edge_nll_and_grad(s: f64, shape: MixtureShape, r1: f64, r2: f64) -> (f64, EdgeNllGrad) {
    let log_comp = |weight: f64, mu: f64, r: f64| {
        let z = (s - mu) / r;
        weight.ln() - 0.5 * z * z - r.ln() - LOG_SQRT_2PI
    };
    let l1 = log_comp(shape.w, shape.mu1, r1);
    let l2 = log_comp(1.0 - shape.w, shape.mu2, r2);
    let m = l1.max(l2);
    let lse = m + ((l1 - m).exp() + (l2 - m).exp()).ln();
    let (g1, g2) = ((l1 - lse).exp(), (l2 - lse).exp());
    let (d1, d2) = (s - shape.mu1, s - shape.mu2);
    let grad = EdgeNllGrad {
        score: g1 * d1 / (r1 * r1) + g2 * d2 / (r2 * r2),
        r1: -g1 * (d1 * d1 / r1.powi(3) - 1.0 / r1),
        r2: -g2 * (d2 * d2 / r2.powi(3) - 1.0 / r2),
    };
    (-lse, grad)
}

/// `gamma (r1^-2 + r2^-2)`, which keeps the widths from shrinking to zero.
pub fn width_penalty(r1: f64, r2: f64, gamma: f64) -> f64 {
    gamma * (r1.powi(-2) + r2.powi(-2))
}

/// Prior loss of a filtered graph's edge scores.
pub fn prior_loss(fg: &FilteredGraph, prior: &MixturePrior, gamma: f64) -> Result<f64> {
    prior.validate()?;
    let nll: f64 = fg.edge_scores.iter().map(|&s| edge_nll_and_grad(s, prior.shape, prior.r1, prior.r2).0).sum();
    Ok(nll + width_penalty(prior.r1, prior.r2, gamma))
}

/// Records the prior loss of the `E x 1` score column `scores` on `tape`.
pub fn prior_loss_on_tape(tape: &mut Tape, scores: Var, r1: Var, r2: Var, shape: MixtureShape, gamma: f64) -> Var {
    let nll = tape.mixture_nll(scores, r1, r2, shape);
    if gamma == 0.0 {
        return nll;
    }
    let p1 = tape.powi(r1, -2);
    let p2 = tape.powi(r2, -2);
    let widths = tape.add(p1, p2);
    let widths = tape.scale(widths, gamma);
    tape.add(nll, widths)
}

/// Outcome of minimising the prior alone over free scores.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorDescent {
    pub scores: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub losses: Vec<f64>,
}

impl PriorDescent {
    /// Fraction of scores within `tol` of either mean.
    pub fn near_modes(&self, shape: MixtureShape, tol: f64) -> f64 {
        let near = self.scores.iter().filter(|&&s| (s - shape.mu1).abs() <= tol || (s - shape.mu2).abs() <= tol);
        near.count() as f64 / self.scores.len().max(1) as f64
    }
}

/// Adam on the summed prior loss over `scores` and both widths. After every
/// step scores are clipped to [0, 1] and widths projected to
/// `MIN_PRIOR_WIDTH`, as in training.
pub fn descend_prior(scores: Vec<f64>, prior: &MixturePrior, gamma: f64, steps: usize, lr: f64) -> Result<PriorDescent> {
    prior.validate()?;
    let n = scores.len();
    let mut store = ParamStore::new();
    store.insert("scores", Array2::from_shape_vec((n, 1), scores).map_err(|e| Error::Domain(e.to_string()))?)?;
    store.insert("r1", Array2::from_elem((1, 1), prior.r1))?;
    store.insert("r2", Array2::from_elem((1, 1), prior.r2))?;
    let mut opt = Adam::new(&store, lr);
    let mut losses = Vec::with_capacity(steps);
    for _ in 0..steps {
        let mut tape = Tape::new();
        let v = store.on_tape(&mut tape);
        let out = prior_loss_on_tape(&mut tape, v[0], v[1], v[2], prior.shape, gamma);
        losses.push(tape.scalar(out));
        tape.backward(out)?;
        let grads = v.iter().map(|&x| tape.grad(x)).collect::<Result<Vec<_>>>()?;
        opt.step(&mut store, &grads, &[])?;
        store.get_mut("scores")?.mapv_inplace(|s| s.clamp(0.0, 1.0));
        for r in ["r1", "r2"] {
            store.get_mut(r)?.mapv_inplace(|x| x.max(MIN_PRIOR_WIDTH));
        }
    }
    Ok(PriorDescent {
        scores: store.get("scores")?.iter().copied().collect(),
        r1: store.get("r1")?[[0, 0]],
        r2: store.get("r2")?[[0, 0]],
        losses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::gradcheck;
    use crate::graphs::{lower_star_extend, Graph};
    use ndarray::Array2;

    fn density(s: f64, mu: f64, r: f64) -> f64 {
        (-(s - mu).powi(2) / (2.0 * r * r)).exp() / (r * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn nll_matches_direct_density() {
        let shape = MixtureShape::default();
        for &s in &[0.0, 0.1, 0.25, 0.5, 0.77, 1.0] {
            let direct = -(0.5 * density(s, 0.25, 0.2) + 0.5 * density(s, 0.75, 0.3)).ln();
            let (v, _) = edge_nll_and_grad(s, shape, 0.2, 0.3);
            assert!((v - direct).abs() < 1e-13);
        }
    }

    #[test]
    fn score_at_first_mode() {
        // 0.5 * 1.59577 + 0.5 * 0.21597 = 0.90587 -> -ln = 0.09886
        let (v, _) = edge_nll_and_grad(0.25, MixtureShape::default(), 0.25, 0.25);
        let n0 = 1.0 / (0.25 * (2.0 * std::f64::consts::PI).sqrt());
        assert!((n0 - 1.59577).abs() < 1e-5);
        assert!((v - 0.09886).abs() < 1e-5, "{v}");
    }

    #[test]
    fn width_penalty_at_default() {
        assert!((width_penalty(0.25, 0.25, 0.01) - 0.32).abs() < 1e-15);
        assert_eq!(width_penalty(0.25, 0.25, 1.0), 32.0);
    }

    #[test]
    fn non_positive_width_is_domain_error() {
        let g = Graph::unlabeled(2, vec![(0, 1)]).unwrap();
        let fg = lower_star_extend(&g, &[0.3, 0.6]).unwrap();
        let prior = MixturePrior { r1: 0.0, ..MixturePrior::default() };
        assert!(matches!(prior_loss(&fg, &prior, 0.0), Err(Error::Domain(_))));
        let prior = MixturePrior { r2: -0.1, ..MixturePrior::default() };
        assert!(matches!(prior_loss(&fg, &prior, 0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn prior_loss_sums_edges() {
        let g = Graph::unlabeled(3, vec![(0, 1), (1, 2)]).unwrap();
        let fg = lower_star_extend(&g, &[0.3, 0.6, 0.9]).unwrap();
        let prior = MixturePrior::default();
        let expected: f64 = [0.3, 0.6].iter().map(|&s| edge_nll_and_grad(s, prior.shape, 0.25, 0.25).0).sum::<f64>()
            + width_penalty(0.25, 0.25, 0.01);
        assert!((prior_loss(&fg, &prior, 0.01).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn tape_gradient_matches_finite_differences() {
        let params = vec![
            Array2::from_shape_vec((5, 1), vec![0.05, 0.31, 0.5, 0.62, 0.97]).unwrap(),
            Array2::from_elem((1, 1), 0.21),
            Array2::from_elem((1, 1), 0.33),
        ];
        let report = gradcheck(&params, 1e-5, |tape, v| {
            Ok(prior_loss_on_tape(tape, v[0], v[1], v[2], MixtureShape::default(), 0.01))
        })
        .unwrap();
        assert!(report.max_rel_error < 1e-6, "{report:?}");
        assert!(report.kinks.is_empty());
    }

    #[test]
    fn descent_separates_scores() {
        // At r = 0.25 the modes are exactly 2r apart and the mixture is flat
        // topped; narrower widths make it bimodal.
        let shape = MixtureShape::default();
        for (start, mode) in [(0.45, 0.25), (0.55, 0.75), (0.02, 0.25), (0.99, 0.75)] {
            let mut s: f64 = start;
            for _ in 0..2000 {
                s -= 0.01 * edge_nll_and_grad(s, shape, 0.15, 0.15).1.score;
            }
            assert!((s - mode).abs() < 0.05, "{start} -> {s}");
        }
    }
}
