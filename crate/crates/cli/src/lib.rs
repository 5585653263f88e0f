//! Command-line surface of the dual-network probabilistic forecaster:
//! dataset generation, training, evaluation, single-series forecasting, and
//! all file formats (wide dataset CSVs, checkpoints, reports, figure
//! CSV/SVG, manifests).

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset_csv;
pub mod error;
pub mod manifest;
pub mod report_files;
pub mod svg;

pub use error::CliError;
