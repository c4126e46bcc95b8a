//! Scenario-driven front end for the reaction-network integral-control
//! toolkit: load a JSON scenario, analyze or simulate it, compile it to a
//! DNA strand displacement circuit, or sweep parameters. Artifacts are
//! deterministic CSV traces and key=value reports.

// Validation uses `!(v > 0.0)` so that NaN fails closed.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod output;
pub mod run;
pub mod scenario;
