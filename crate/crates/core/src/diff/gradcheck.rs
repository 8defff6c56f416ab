use super::{Tape, Tensor, Var};
use crate::error::{Error, Result};

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Clone, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_error: f64,
    /// `(parameter, row-major index)` of the worst coordinate.
    pub worst: Option<(usize, usize)>,
    pub checked: usize,
    /// Coordinates whose `±h` probes cross a non-differentiable locus
    /// (a different branch signature), excluded from the comparison.
    pub kinks: Vec<(usize, usize)>,
}

fn evaluate<F>(params: &[Tensor], f: &F) -> Result<(f64, u64)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    Ok((tape.scalar(out), tape.branch_signature()))
}

/// Central-difference check of `f` at `params`. The relative error of a
/// coordinate is `|a - n| / max(1e-8, |a| + |n|)`.
pub fn gradcheck<F>(params: &[Tensor], h: f64, f: F) -> Result<GradCheck>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = params.iter().map(|p| tape.leaf(p.clone())).collect();
    let out = f(&mut tape, &vars)?;
    if tape.value(out).dim() != (1, 1) {
        return Err(Error::State("gradcheck needs a scalar function".into()));
    }
    let signature = tape.branch_signature();
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars.iter().map(|&v| tape.grad(v)).collect::<Result<_>>()?;

    let mut report = GradCheck { max_rel_error: 0.0, worst: None, checked: 0, kinks: Vec::new() };
    let mut probe = params.to_vec();
    for (k, param) in params.iter().enumerate() {
        let cols = param.ncols();
        for i in 0..param.len() {
            let at = [i / cols, i % cols];
            let original = param[at];
            probe[k][at] = original + h;
            let (plus, sig_plus) = evaluate(&probe, &f)?;
            probe[k][at] = original - h;
            let (minus, sig_minus) = evaluate(&probe, &f)?;
            probe[k][at] = original;
            if sig_plus != signature || sig_minus != signature {
                report.kinks.push((k, i));
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let a = analytic[k][at];
            let rel = (a - numeric).abs() / (a.abs() + numeric.abs()).max(1e-8);
            report.checked += 1;
            if report.worst.is_none() || rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = Some((k, i));
            }
        }
    }
    Ok(report)
}
