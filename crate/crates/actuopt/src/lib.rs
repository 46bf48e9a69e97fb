//! Configuration, artifact formats and batch commands for `actuopt-core`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod problem;

pub use commands::{run, Command, Outcome, RunOptions};
pub use config::ExperimentConfig;
pub use error::AppError;

pub const EXIT_OK: i32 = 0;
/// A verification check or the optimizer's convergence test failed.
pub const EXIT_CHECK: i32 = 1;
/// Bad command line or configuration.
pub const EXIT_USAGE: i32 = 2;
/// Blow-up or another numerical failure.
pub const EXIT_NUMERICS: i32 = 3;
pub const EXIT_IO: i32 = 4;
