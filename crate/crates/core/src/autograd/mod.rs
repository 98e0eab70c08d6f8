//! Dense float64 tensors with reverse-mode differentiation and Adam.

mod params;
mod tape;
mod tensor;

pub use params::{AdamConfig, ParamRecord, ParamStore};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;
