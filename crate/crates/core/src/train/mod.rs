//! Initialization, losses, reverse-mode gradients, Adam, checkpoints.

pub mod adam;
pub mod checkpoint;
pub mod init;
pub mod loss;
pub mod params;
pub mod rng;
pub mod tape;
