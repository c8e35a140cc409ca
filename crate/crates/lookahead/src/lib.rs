//! Simulation, figure data and the command-line front end for the
//! look-ahead power control model in `lookahead-core`.

pub mod cli;
pub mod error;
pub mod figures;
pub mod render;
pub mod simulator;

pub use error::{Error, Result};
pub use lookahead_core as core;
