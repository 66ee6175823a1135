//! Relational graph convolutional networks built from scratch.
//!
//! The crate provides its own sparse kernels, reverse-mode gradients and
//! optimizer, a knowledge-graph data model with augmentation / dropout /
//! sampling, the relational weight decompositions (full, basis, block
//! diagonal, diagonal) and the bottleneck variant, plus end-to-end node
//! classification and link prediction with filtered ranking metrics.

pub mod error;
pub mod graph;
pub mod io;
pub mod layers;
pub mod sparse;
pub mod tasks;
pub mod train;

pub mod cli;

pub use error::{Result, RgcnError};
