//! Batch harness for the tactile manipulation simulator: suite files, a
//! parallel runner, result and summary files, grasp-depth sweeps and plot
//! data.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod plotdata;
pub mod results;
pub mod runner;
pub mod scenarios;
pub mod schema;
pub mod sweep;

pub use runner::{run_suite, run_trial, trial_seed, RunError, RunOptions, SuiteOutcome, TrialOutcome};
pub use schema::{Method, Scenario, SchemaError, Suite};
