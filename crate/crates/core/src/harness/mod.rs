//! End-to-end test runs, file formats and reports.

pub mod config;
pub mod gof;
pub mod io;
pub mod report;

pub use config::TestConfig;
pub use gof::{run_gof, run_trials, RunReport, TrialResult};
pub use io::{emit, ingest};
pub use report::{emit_report, ReportFormat};
