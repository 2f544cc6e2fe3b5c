//! Minimal reverse-mode differentiation for the model.
//!
//! The op inventory is closed: matmul, broadcast add/multiply, scale, relu,
//! row/column concatenation, layer normalisation, row softmax, row gather,
//! scatter-add, cross-entropy, sum/mean, plus transpose/reshape for shape
//! plumbing.

mod checkpoint;
mod matrix;
mod optim;
mod params;
mod tape;

pub use checkpoint::{decode_params, encode_params, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use matrix::Matrix;
pub use optim::{clip_grad_norm, Adam, AdamConfig};
pub use params::{ParamId, ParamStore};
pub use tape::{softmax_rows, Gradients, Tape, Var};
