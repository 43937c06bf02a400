//! Experiment harness for the fractional-memory DP-SGD toolkit: config
//! parsing, multi-seed runs, ablation sweeps, privacy accounting output,
//! summary statistics, and plot-ready report bundles.

pub mod config;
pub mod logio;
pub mod report;
pub mod runner;
pub mod stats;
pub mod sweep;
pub mod verify;
