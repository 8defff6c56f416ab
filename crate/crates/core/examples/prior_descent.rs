//! Minimising the mixture prior alone pulls free scores onto its two modes.
//!
//!     cargo run --release --example prior_descent -- 500

use rand::Rng as _;
use topo_rationale::model::prior::{descend_prior, MixturePrior};
use topo_rationale::rng::rng_from_seed;

fn main() -> topo_rationale::Result<()> {
    let steps: usize = std::env::args().nth(1).map_or(500, |a| a.parse().expect("step count"));
    let mut rng = rng_from_seed(0);
    let scores: Vec<f64> = (0..1000).map(|_| rng.random()).collect();
    let prior = MixturePrior::default();
    let d = descend_prior(scores, &prior, 0.01, steps, 0.01)?;
    for (i, l) in d.losses.iter().enumerate().step_by((steps / 10).max(1)) {
        println!("step {i:4}  loss {l:10.2}");
    }
    let mut hist = [0usize; 10];
    for &s in &d.scores {
        hist[((s * 10.0) as usize).min(9)] += 1;
    }
    println!("widths r1 = {:.3}, r2 = {:.3}", d.r1, d.r2);
    println!("histogram over [0, 1] in tenths: {hist:?}");
    println!("within 0.1 of a mode: {:.1}%", 100.0 * d.near_modes(prior.shape, 0.1));
    Ok(())
}
