//! Reconstruction of who-infected-whom propagation forests from a single
//! diffusion snapshot.
//!
//! The pipeline learns a per-edge influence function from node features,
//! a variational prior over source sets, and alternates between inferring
//! the most probable forest and fitting the parameters. At test time a
//! latent code is optimised against the observed snapshot, and the forest
//! is read off the masked infection-probability iteration.

pub mod checkpoint;
pub mod diagnostics;
pub mod error;
pub mod graph;
pub mod inference;
pub mod influence;
pub mod metrics;
pub mod model;
pub mod numeric;
pub mod prior;
pub mod rng;
pub mod sim;
pub mod training;
pub mod tree;

pub use error::{Error, Result};
pub use model::{InfluenceKind, ModelState};
