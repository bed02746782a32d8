//! Batch front-end for abnormal-set computations in step-2 Carnot groups:
//! a group catalog, TOML group/control/report files, and the commands
//! behind the `carnot-abn` binary.

pub mod catalog;
pub mod commands;
pub mod error;
pub mod report;
pub mod spec_file;

pub use error::CliError;
