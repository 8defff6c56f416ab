//! Barcode export: the persistence pairs of the rationale side, the
//! complement side and the full filtration of every graph.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::graphs::{lower_star_extend, partition, Graph, PARTITION_THRESHOLD};
use crate::model::{evaluate, Config, Model};
use crate::persistence::{compute_ph, PersistenceDiagram};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BarcodeRow {
    pub split: String,
    pub graph_id: usize,
    /// `X`, `EPS` or `FULL`.
    pub side: &'static str,
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub creator: String,
    /// `ESSENTIAL` for classes that never die.
    pub killer: String,
}

pub const SIDES: [&str; 3] = ["X", "EPS", "FULL"];

/// Diagrams of the model's filtration of `graph`, in [`SIDES`] order.
pub fn graph_diagrams(graph: &Graph, node_scores: &[f64]) -> Result<[PersistenceDiagram; 3]> {
    let fg = lower_star_extend(graph, node_scores)?;
    let parts = partition(&fg, PARTITION_THRESHOLD)?;
    Ok([compute_ph(&parts.x_side)?, compute_ph(&parts.eps_side)?, compute_ph(&fg.complex())?])
}

pub fn barcode_rows(model: &Model, graphs: &[Graph], config: &Config, split: &str) -> Result<Vec<BarcodeRow>> {
    let eval = evaluate(model, graphs, config)?;
    let mut rows = Vec::new();
    for (graph_id, (g, pred)) in graphs.iter().zip(&eval.graphs).enumerate() {
        for (side, diagram) in SIDES.iter().zip(graph_diagrams(g, &pred.node_scores)?) {
            let points = diagram.canonical().points;
            rows.extend(points.iter().map(|p| BarcodeRow {
                split: split.to_string(),
                graph_id,
                side,
                dim: p.dim,
                birth: p.birth,
                death: p.death,
                creator: p.creator.to_string(),
                killer: p.killer.map_or_else(|| "ESSENTIAL".to_string(), |k| k.to_string()),
            }));
        }
    }
    Ok(rows)
}

pub fn write_barcodes(path: &Path, rows: &[BarcodeRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    for row in rows {
        w.serialize(row).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> crate::error::Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => io.into(),
        other => crate::error::Error::Parse(format!("{other:?}")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{architecture_for, initial_model};

    #[test]
    fn sides_reconcile_with_betti_numbers() {
        let g = Graph::unlabeled(6, vec![(0, 1), (1, 2), (0, 2), (2, 3), (3, 4), (4, 5), (3, 5)]).unwrap();
        let config = Config { hidden: 8, elements: 2, ..Config::default() };
        let graphs = vec![g];
        let model = initial_model(&config, architecture_for(&config, &[&graphs]).unwrap()).unwrap();
        let rows = barcode_rows(&model, &graphs, &config, "test").unwrap();
        let essential = |side: &str, dim: usize| {
            rows.iter().filter(|r| r.side == side && r.dim == dim && r.killer == "ESSENTIAL").count()
        };
        // The full filtration ends with the whole graph: one component, two cycles.
        assert_eq!((essential("FULL", 0), essential("FULL", 1)), (1, 2));
        let full = rows.iter().filter(|r| r.side == "FULL").count();
        // One dim-0 point per node, one dim-1 point per edge that closes a cycle.
        assert_eq!(full, 6 + 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        write_barcodes(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("split,graph_id,side,dim,birth,death,creator,killer\n"));
        assert_eq!(text.lines().count(), rows.len() + 1);
    }
}
