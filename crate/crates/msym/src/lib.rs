//! Experiment driver for the `msym-core` integrators.
//!
//! * [`config`] parses strict TOML experiment files.
//! * [`mc`] runs coupled Monte Carlo error ladders and energy traces in
//!   parallel with deterministic reduction.
//! * [`checks`] runs conservation-law and tableau checks.
//! * [`output`] writes CSV tables and the JSON run manifest atomically.
//! * [`run`] dispatches a command and maps failures to exit codes.

#![forbid(unsafe_code)]
#![warn(missing_docs)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checks;
pub mod config;
pub mod mc;
pub mod output;
pub mod run;
