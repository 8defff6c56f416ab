//! Bottleneck distances under both diagonal conventions, and the exact
//! topological discrepancy between two small families of diagrams.
//!
//!     cargo run --release --example bottleneck

use topo_rationale::diagram_metrics::{bottleneck_points, dtopo_exact, DiagonalConvention, GroundCost};
use topo_rationale::graphs::{lower_star_extend, Graph};
use topo_rationale::persistence::compute_ph;

fn main() -> topo_rationale::Result<()> {
    let p = [(0.1, 0.6), (0.2, 0.3)];
    let q = [(0.15, 0.55)];
    for c in DiagonalConvention::ALL {
        println!("{:9} d_B = {:.4}", c.name(), bottleneck_points(&p, &q, c));
    }

    let cycle = Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)])?;
    let path = Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3)])?;
    let diagram = |g: &Graph, s: &[f64]| lower_star_extend(g, s).and_then(|fg| compute_ph(&fg.complex()));
    let ps = vec![diagram(&cycle, &[0.9, 0.7, 0.5, 0.3])?, diagram(&cycle, &[0.8, 0.8, 0.6, 0.6])?];
    let qs = vec![diagram(&path, &[0.9, 0.7, 0.5, 0.3])?];
    for lambda0 in [1.0, 16.0] {
        println!("dtopo (lambda0 = {lambda0}) = {:.4}", dtopo_exact(&ps, &qs, &GroundCost::weighted(lambda0))?);
    }
    Ok(())
}
