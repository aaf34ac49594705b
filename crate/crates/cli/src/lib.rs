//! Scenario runner for the ATRP reserving engine: claims ingestion,
//! calibration into a versioned model bundle, scenario grids and reports.

pub mod app;
pub mod bundle;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod scenario;

pub use error::{CliError, Result};
