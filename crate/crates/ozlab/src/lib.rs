pub mod error;
pub mod cli;
pub mod config;
pub mod manifest;
pub mod lattice;
pub mod ising;
pub mod renewal;
pub mod saw;
pub mod skeleton;
pub mod stats;
pub mod weights;
pub mod wulff;

pub use error::{Error, Result};
