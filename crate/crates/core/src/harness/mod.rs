//! Configuration, metrics persistence, sweeps and the command line.

pub mod cli;
pub mod config;
pub mod metrics;
pub mod output;
pub mod plot;
pub mod sweep;
pub mod validate;
