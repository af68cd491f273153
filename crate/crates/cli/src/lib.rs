//! Experiment runner for the delayed-commit prisoner's dilemma.
//!
//! The library half of the `cpd` binary: experiment files
//! ([`config::ExperimentSpec`]), delay sweeps with seeded trial batches
//! ([`sweep::run_sweep`]), single trials with full artifacts
//! ([`single::run_single`]), and networked trials ([`net_cmd`]). The binary
//! adds argument parsing and exit-code policy on top; everything else
//! lives here where tests can reach it.

pub mod config;
pub mod net_cmd;
pub mod single;
pub mod sweep;
