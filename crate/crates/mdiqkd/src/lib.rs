//! Std companion of `mdiqkd-core`: count sampling, the counts CSV format,
//! scenario files, reports, parallel optimization and the command line.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod commands;
pub mod config;
pub mod counts_csv;
pub mod error;
pub mod parallel;
pub mod report;
pub mod sampling;

pub use error::{AppError, Result};
