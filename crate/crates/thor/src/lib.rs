//! File formats, dataset bundles, checkpoints, reports and the command line
//! around `thor-core`.

pub mod bundle;
pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod selfcheck;
pub mod synth;

pub use error::{Error, Result};
