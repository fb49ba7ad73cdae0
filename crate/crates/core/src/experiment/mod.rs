//! Batch experiments: approaches x K x replicates on one dataset, with
//! long-format metric tables and figure-ready summaries.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ExperimentConfig, InputSource};
pub use report::{report, MetricRow};
pub use run::{execute, run, write_results, CellResult, ExperimentResults};
