//! Barcodes of a trained model's filtrations, written as CSV.
//!
//!     cargo run --release --example barcodes -- /tmp/barcodes.csv

use topo_rationale::datasets::{generate, DatasetSpec, Variant};
use topo_rationale::harness::barcodes::{barcode_rows, write_barcodes};
use topo_rationale::model::{train, Config};

fn main() -> topo_rationale::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "barcodes.csv".into());
    let splits = generate(&DatasetSpec::new(Variant::BA2Motifs, 200, 0))?;
    let config = Config { epochs: 10, ..Config::default() };
    let outcome = train(&splits.train, &splits.val, &splits.test, &config)?;
    let rows = barcode_rows(&outcome.model, &splits.test[..4], &config, "test")?;
    for r in rows.iter().filter(|r| r.graph_id == 0 && r.side != "FULL") {
        println!("{:3} H{} [{:.3}, {:.3})  {} -> {}", r.side, r.dim, r.birth, r.death, r.creator, r.killer);
    }
    write_barcodes(std::path::Path::new(&out), &rows)?;
    println!("{} bars -> {out}", rows.len());
    Ok(())
}
