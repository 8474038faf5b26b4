//! File formats, configuration handling and the command implementations
//! behind the `podpo` binary.

pub mod checkpoint;
pub mod config;
pub mod diag;
pub mod gradcheck;
pub mod metrics;
pub mod run;
