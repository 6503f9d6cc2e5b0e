//! Experiment runner: TOML configs, CSV reports and a run manifest.

mod config;
mod runner;

pub use config::{EllipsoidCase, Experiment, ExperimentConfig, NamedSpectrum, Options, SpaceSpec};
pub use runner::{default_ellipsoid_cases, run, sweep, Check, RunOptions, RunOutcome, SweepAxis};
