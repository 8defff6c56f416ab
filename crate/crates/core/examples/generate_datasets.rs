//! Generates every synthetic variant and prints label balance and sizes.
//!
//!     cargo run --release --example generate_datasets -- 200

use topo_rationale::datasets::{generate, DatasetSpec, Variant};

fn main() -> topo_rationale::Result<()> {
    let graphs: usize = std::env::args().nth(1).map_or(200, |a| a.parse().expect("graph count"));
    for variant in Variant::ALL {
        let mut spec = DatasetSpec::new(variant, graphs, 0);
        spec.n = 2;
        spec.b = 0.9;
        let splits = generate(&spec)?;
        let all: Vec<_> = splits.train.iter().chain(&splits.val).chain(&splits.test).collect();
        let classes = all.iter().map(|g| g.label).max().unwrap_or(0) + 1;
        let counts: Vec<usize> = (0..classes).map(|c| all.iter().filter(|g| g.label == c).count()).collect();
        let nodes = all.iter().map(|g| g.num_nodes).sum::<usize>() as f64 / all.len() as f64;
        let gt = all.iter().flat_map(|g| g.gt_edge_mask.iter().flatten()).filter(|&&m| m).count() as f64
            / all.iter().map(|g| g.num_edges()).sum::<usize>() as f64;
        println!(
            "{:18} splits {:>4}/{:>3}/{:>3}  labels {counts:?}  mean nodes {nodes:.1}  rationale edges {:.1}%",
            variant.name(),
            splits.train.len(),
            splits.val.len(),
            splits.test.len(),
            100.0 * gt
        );
    }
    Ok(())
}
