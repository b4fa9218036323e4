//! Config parsing, experiment dispatch and result emission for the `sofic` binary.

pub mod config;
pub mod emit;
pub mod run;
