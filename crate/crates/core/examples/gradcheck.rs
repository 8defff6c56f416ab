//! Reverse-mode gradients of the full training loss against central
//! differences, routed through persistence.
//!
//!     cargo run --release --example gradcheck

use topo_rationale::diff::gradcheck;
use topo_rationale::graphs::Graph;
use topo_rationale::model::{forward, loss, Architecture, Batch, Config, Mode, Model};
use topo_rationale::rng::rng_from_seed;

fn main() -> topo_rationale::Result<()> {
    let g = Graph::new(
        6,
        vec![(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (1, 5)],
        vec![vec![1.0]; 6],
        0,
        Some(vec![true, true, true, false, false, false]),
    )?;
    let arch = Architecture { in_dim: 1, hidden: 8, layers: 2, classes: 2, elements: 4, degree_buckets: 4 };
    let model = Model::new(arch, &mut rng_from_seed(1))?;
    let batch = Batch::new(&[&g])?;
    let config = Config { alpha: 1.0, beta: 1.0, degree_buckets: 4, ..Config::default() };
    let report = gradcheck(model.params.tensors(), 1e-5, |tape, vars| {
        let mut rng = rng_from_seed(2);
        let fwd = forward(tape, &model, vars, &batch, &config, &mut Mode::Train(&mut rng))?;
        Ok(loss(tape, &fwd, &batch, &config).total)
    })?;
    println!("{} coordinates checked, {} on kinks skipped", report.checked, report.kinks.len());
    println!("max relative error {:.2e}", report.max_rel_error);
    if let Some((p, i)) = report.worst {
        println!("worst at {}[{i}]", model.params.names()[p]);
    }
    Ok(())
}
