//! Driver library behind the `dipt` binary: run parameters, dataset
//! directories, manifests and replay.

pub mod commands;
pub mod dataset;
pub mod error;
pub mod params;
pub mod pool;
pub mod run;
