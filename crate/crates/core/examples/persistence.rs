//! Persistence of a lower-star filtration: a triangle with a tail, scored so
//! the cycle closes late.
//!
//!     cargo run --release --example persistence

use topo_rationale::graphs::{lower_star_extend, partition, Graph, PARTITION_THRESHOLD};
use topo_rationale::persistence::{compute_ph, compute_ph_oracle};

fn main() -> topo_rationale::Result<()> {
    let g = Graph::unlabeled(5, vec![(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)])?;
    let scores = [0.9, 0.8, 0.3, 0.6, 0.4];
    let fg = lower_star_extend(&g, &scores)?;
    println!("node times {:?}", fg.node_times);
    println!("edge times {:?}", fg.edge_times);

    let diagram = compute_ph(&fg.complex())?;
    for p in &diagram.points {
        let killer = p.killer.map_or("essential".to_string(), |k| k.to_string());
        println!("H{} [{:.2}, {:.2})  created by {}, killed by {killer}", p.dim, p.birth, p.death, p.creator);
    }
    // Matrix reduction over Z/2 agrees with union-find.
    assert!(diagram.multiset_eq(&compute_ph_oracle(&fg.complex())?));

    let parts = partition(&fg, PARTITION_THRESHOLD)?;
    for (side, complex) in [("X", &parts.x_side), ("eps", &parts.eps_side)] {
        let d = compute_ph(complex)?;
        println!("{side}: H0 {:?}  H1 {:?}", d.coords(0), d.coords(1));
    }
    Ok(())
}
