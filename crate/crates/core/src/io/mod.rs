//! Dataset ingestion, run configuration and metric/stat output.

pub mod config;
pub mod labels;
pub mod ntriples;
pub mod stats;
pub mod tsv;
