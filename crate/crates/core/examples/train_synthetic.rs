//! Trains on a freshly generated synthetic benchmark and prints the history,
//! the mean score of rationale vs other edges, and the selected epoch.
//!
//!     cargo run --release --example train_synthetic -- variant=BAHouseOrGridNRnd n=2 seed=1
//!
//! `variant`, `graphs`, `n` and `b` shape the dataset; every other
//! `key=value` overrides the training configuration.

use topo_rationale::datasets::{generate, DatasetSpec, Variant};
use topo_rationale::model::{evaluate, train, Config};

fn main() -> topo_rationale::Result<()> {
    env_logger::init();
    let mut config = Config::default();
    let mut spec = DatasetSpec::new(Variant::BA2Motifs, 1000, 0);
    for arg in std::env::args().skip(1) {
        let (k, v) = arg.split_once('=').expect("arguments look like key=value");
        let bad = || topo_rationale::Error::Config(format!("bad value {v:?} for {k}"));
        match k {
            "variant" => spec.variant = v.parse()?,
            "graphs" => spec.num_graphs = v.parse().map_err(|_| bad())?,
            "n" => spec.n = v.parse().map_err(|_| bad())?,
            "b" => spec.b = v.parse().map_err(|_| bad())?,
            _ => config.set(k, v)?,
        }
    }
    spec.seed = config.seed;
    let splits = generate(&spec)?;
    let start = std::time::Instant::now();
    let out = train(&splits.train, &splits.val, &splits.test, &config)?;
    println!("{}", topo_rationale::model::HISTORY_HEADER);
    for r in &out.history {
        println!("{}", r.csv_row());
    }
    let eval = evaluate(&out.model, &splits.test, &config)?;
    let classes = splits.test.iter().map(|g| g.label).max().unwrap_or(0) + 1;
    for class in 0..classes {
        let (mut motif, mut other) = (Vec::new(), Vec::new());
        for (g, r) in splits.test.iter().zip(&eval.graphs).filter(|(g, _)| g.label == class) {
            let Some(mask) = &g.gt_edge_mask else { continue };
            for (&s, &m) in r.edge_scores.iter().zip(mask) {
                if m { motif.push(s) } else { other.push(s) }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len().max(1) as f64;
        println!("class {class}: rationale edges {:.3}, other edges {:.3}", mean(&motif), mean(&other));
    }
    println!(
        "best epoch {:?}: test accuracy {:.3}, auc {:.3} ({:.1}s)",
        out.best_epoch,
        eval.accuracy,
        eval.auc.unwrap_or(f64::NAN),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}
