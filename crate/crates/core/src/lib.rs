//! Learning persistent rationale filtrations for interpretable graph
//! classification.
//!
//! A message-passing network scores nodes; the scores induce a lower-star
//! filtration that is split at 0.5 into a rationale side and a complement
//! side. Persistent homology of both sides feeds a learnable lower bound on
//! their topological discrepancy, which the training loss maximises.

pub mod datasets;
pub mod diagram_metrics;
pub mod diff;
pub mod error;
pub mod graphs;
pub mod harness;
pub mod model;
pub mod persistence;
pub mod rng;
pub mod vectorize;

pub use error::{Error, Result};

/// Version string recorded in every manifest.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));
