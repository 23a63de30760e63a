//! Experiment runner for the `qeopt` benchmarks.
//!
//! A TOML [`config::ExperimentConfig`] fixes the method, problem sizes, ensemble
//! sizes and master seed. The [`studies`] functions expand it into tasks, run them
//! on a thread pool and write versioned CSV tables plus a manifest. Every random
//! stream is derived from the master seed by [`seeds::SeedTree`], so output does
//! not depend on the number of workers.

pub mod config;
pub mod error;
pub mod output;
pub mod report;
pub mod runner;
pub mod seeds;
pub mod studies;

pub use config::{ExperimentConfig, Method};
pub use error::{HarnessError, Result};
pub use studies::{effort_sweep, gap_study, probability_sweep, scaling_study, RunOptions, SweepOutput};
