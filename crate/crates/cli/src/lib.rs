//! Batch runner for `noisy-ibc` scenarios.
//!
//! A scenario file selects a spectrum, a cost model, a noise model and a list
//! of tasks. [`run::run_scenario`] executes the tasks in order and writes one
//! CSV per task plus a `summary.txt` into the output directory.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod run;

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod book_cli {}
