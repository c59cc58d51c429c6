//! Command-line layer of torsionlab: configuration, CSV output and the
//! subcommands, kept in a library so the acceptance tests can drive them.

// `!(v > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod output;
