//! Experiment harness: seeded runs, sweeps and the acceptance suite.

pub mod acceptance;
pub mod config;
pub mod probe;
pub mod rng;
pub mod run;
pub mod sweep;

pub use acceptance::{run_acceptance, AcceptanceOptions, AcceptanceReport, CriterionResult};
pub use config::{RunConfig, OUTPUT_DIR_ENV, TOY_ALPHA};
pub use run::{run_experiment, LogEvent, MetricsRow, RunOutput, RunSummary};
pub use sweep::{run_sweep, Axis, SweepReport, SweepRow};
