//! Minimal reverse-mode differentiation over dense `f64` tensors, plus the
//! SGD optimizer and parameter (de)serialization used for training.

mod graph;
mod params;
mod sgd;
mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use params::{hex_digest, ModelParams, PARAMS_MAGIC, PARAMS_VERSION};
pub use sgd::{sgd_step, SgdState};
pub use tensor::Tensor;
