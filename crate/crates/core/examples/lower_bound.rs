//! The differentiable lower bound against the exact discrepancy on random
//! filtrations. Training uses the constant C = 2, which only shapes
//! gradients and can overshoot; C = 2 n_max keeps the bound sound.
//!
//!     cargo run --release --example lower_bound

use rand::Rng as _;
use topo_rationale::diagram_metrics::{dtopo_exact, GroundCost};
use topo_rationale::graphs::{lower_star_extend, Graph};
use topo_rationale::persistence::{compute_ph, PersistenceDiagram};
use topo_rationale::rng::{rng_from_seed, Rng};
use topo_rationale::vectorize::{lower_bound, Normalization, StructureElementBank};

fn family(rng: &mut Rng, g: &Graph, k: usize) -> topo_rationale::Result<Vec<PersistenceDiagram>> {
    (0..k)
        .map(|_| {
            let s: Vec<f64> = (0..g.num_nodes).map(|_| rng.random()).collect();
            compute_ph(&lower_star_extend(g, &s)?.complex())
        })
        .collect()
}

fn main() -> topo_rationale::Result<()> {
    let mut rng = rng_from_seed(5);
    let house = Graph::unlabeled(5, vec![(0, 1), (1, 2), (2, 3), (0, 3), (2, 4), (3, 4)])?;
    let tree = Graph::unlabeled(5, vec![(0, 1), (1, 2), (1, 3), (3, 4)])?;
    let (ps, qs) = (family(&mut rng, &house, 6)?, family(&mut rng, &tree, 6)?);
    let mut bank = StructureElementBank::new(8, &mut rng);
    let exact = dtopo_exact(&ps, &qs, &GroundCost::weighted(bank.lambda0))?;
    println!("exact dtopo          {exact:.4}");
    println!("bound, C = 2         {:.4}", lower_bound(&ps, &qs, &bank)?);
    bank.normalization = Normalization::PerBatch;
    println!("bound, C = 2 n_max   {:.4}", lower_bound(&ps, &qs, &bank)?);
    Ok(())
}
