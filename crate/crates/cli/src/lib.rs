//! Configuration, parallel trajectory farming and file output for the
//! `sebd` binary.
//!
//! A run is fully determined by its [`RunConfig`]: every trajectory draws its
//! seed from `(master_seed, index)` alone and partial statistics are merged in
//! a fixed block order, so the worker count never changes a written byte.

pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::{Format, InitialState, RunConfig};
pub use error::CliError;
pub use runner::{run, trajectory_seed, RunSummary};
