//! Fully-inductive link prediction over hyper-relational knowledge graphs.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is pure
//! computation: domain types for hyper-relational facts, the relation and
//! entity foundation graphs, a small reverse-mode autodiff engine, the two
//! conditional graph encoders, the edge-biased attention decoder, the masked
//! training loop, ranking evaluation and the inductive split tooling.
//! File formats, checkpoints on disk and the command line live in the
//! companion `thor` crate.

#![no_std]
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod autodiff;
pub mod decoder;
pub mod encoder;
mod error;
pub mod eval;
pub mod graph;
pub mod interaction;
pub mod kg;
pub mod model;
mod real;
pub mod split;
pub mod train;

pub use error::{Error, Result};
pub use real::Real;
