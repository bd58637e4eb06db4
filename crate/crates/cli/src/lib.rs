//! Library side of the `lcattr` command: CSV ingestion, run orchestration,
//! report and plot-series output, and built-in experiments.

pub mod config;
pub mod experiment;
pub mod ingest;
pub mod plot;
pub mod report;
pub mod run;

pub use config::{parse_methods, BackgroundSpec, RunConfig, SigmaSpec};
pub use ingest::{ingest_csv, IngestError, IngestOptions};
pub use plot::{emit_plot_series, PlotKind};
pub use report::{GroupRecord, Report, SampleRecord};
pub use run::{run, run_with, write_report, RunError, RunOutcome};
