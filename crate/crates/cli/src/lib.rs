//! Experiment front end: sweeps, training and noisy evaluation, with CSV
//! tables, SVG figures and `SNN1` checkpoints.

pub mod checkpoint;
pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod results;
pub mod svg;

pub use error::CliError;
