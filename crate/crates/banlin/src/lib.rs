//! Experiment harness for `banlin-core`: configs, parallel replicates, CSV
//! trajectories and JSON reports, plus the checks behind `banlin verify` and
//! `banlin john`.

pub mod config;
pub mod experiment;
pub mod io;
pub mod john;
pub mod json;
pub mod report;
pub mod verify;

pub use config::{resolve, ExperimentConfig, RawConfig, Resolved, Setting};
pub use experiment::{run_experiment, Experiment};
pub use report::{write_outputs, Report};
