//! Statistical tests, reports and the experiment registry.

pub mod experiments;
pub mod report;
pub mod stats;

pub use experiments::{list_experiments, run_experiment, ExperimentConfig, ExperimentInfo};
pub use report::ExperimentReport;
pub use stats::TestResult;
