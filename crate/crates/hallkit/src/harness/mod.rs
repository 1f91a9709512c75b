//! Config parsing, validation, experiment orchestration and report emission.

pub mod config;
pub mod report;
pub mod run;
pub mod validate;

pub use config::{ExperimentConfig, ExperimentKind};
pub use report::{emit_plotdata, Report, RunManifest, SCHEMA_VERSION};
pub use run::{error_json, run, write_error, RunOutcome, ROUTE_TOL};
pub use validate::{validate, Diagnostic, Diagnostics, Severity};
