//! Config-driven experiment driver behind the `csoa` binary.

pub mod check;
pub mod commands;
pub mod config;
pub mod csvio;
pub mod svg;

pub use check::{run_checks, CheckOutcome};
pub use commands::{
    execute_datagen, execute_report, execute_run, execute_sweep, ReportOptions, RunSummary, SweepAxis,
    SweepPoint, SweepSummary,
};
pub use config::{apply_override, ConfigError, DeskSet, ProblemSpec, RunConfig};
pub use csvio::{fmt_f64, trace_header, TraceTable, TraceWriter};
pub use svg::{line_plot, PlotOptions, Series};
