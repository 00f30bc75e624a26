//! IO, file formats, Monte Carlo and the teleportation pipeline on top of
//! `holotel-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod mc;
pub mod pgm;
pub mod stats;
pub mod teleport;

pub use error::{Error, Result};
