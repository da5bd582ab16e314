//! Dataset files, run configuration and reports.

pub mod config;
pub mod dataset;
pub mod report;

pub use config::{Design, EstimatorChoice, FitSection, McSection, RunConfig};
pub use dataset::{read_dataset, read_dataset_from, write_dataset, write_dataset_to};
pub use report::{FitReport, McReport};
