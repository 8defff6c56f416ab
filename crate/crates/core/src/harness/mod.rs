pub mod metrics;
pub mod theorem;
pub mod barcodes;
pub mod runs;
