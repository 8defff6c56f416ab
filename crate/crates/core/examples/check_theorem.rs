//! Exhaustive check of the unique-optimum claim on twenty tiny graphs.
//!
//!     cargo run --release --example check_theorem -- 16 0.01

use topo_rationale::harness::theorem::{check_theorem, theorem_instances};

fn main() -> topo_rationale::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().expect("numeric argument")).collect();
    let lambda0 = args.first().copied().unwrap_or(16.0);
    let alpha = args.get(1).copied().unwrap_or(0.01);
    let report = check_theorem(&theorem_instances()?, alpha, lambda0)?;
    for r in &report.instances {
        let ind = r.indicator.map_or(f64::NAN, |l| l.total);
        println!(
            "{:10} {:22} minimisers {:4}  best {:+.4}  indicator {:+.4}  unique {}  first {:0w$b}",
            r.convention,
            r.name,
            r.argmin.len(),
            r.best_total,
            ind,
            r.unique_indicator,
            r.argmin.first().copied().unwrap_or(0),
            w = r.edges
        );
    }
    for (convention, unique, total) in report.unique_counts() {
        println!("{convention}: indicator is the unique minimiser in {unique}/{total}");
    }
    Ok(())
}
