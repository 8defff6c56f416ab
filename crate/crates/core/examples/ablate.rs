//! Full model against the no-topology and no-prior ablations on one seed.
//!
//!     cargo run --release --example ablate -- 0

use topo_rationale::datasets::{generate, DatasetSpec, Variant};
use topo_rationale::harness::runs::Ablation;
use topo_rationale::model::{evaluate, train, Config};

fn main() -> topo_rationale::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |a| a.parse().expect("seed"));
    let splits = generate(&DatasetSpec::new(Variant::BA2Motifs, 1000, seed))?;
    let base = Config { seed, ..Config::default() };
    for ablation in [
        Ablation::default(),
        Ablation { no_topo: true, no_prior: false },
        Ablation { no_topo: false, no_prior: true },
    ] {
        let config = ablation.apply(&base);
        let outcome = train(&splits.train, &splits.val, &splits.test, &config)?;
        let test = evaluate(&outcome.model, &splits.test, &config)?;
        println!("{:9} accuracy {:.3}  auc {:.3}", ablation.label(), test.accuracy, test.auc.unwrap_or(f64::NAN));
    }
    Ok(())
}
