//! Minimal reverse-mode automatic differentiation over dense `f64` tensors.

pub mod checkpoint;
pub mod gradcheck;
mod params;
mod tape;
mod tensor;

use thiserror::Error;

pub use params::{Adam, ParamStore};
pub use tape::{sigmoid, CustomBackward, Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdError {
    #[error("shape error in {op}: {msg}")]
    Shape { op: &'static str, msg: String },
    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for AdError {
    fn from(e: std::io::Error) -> Self {
        AdError::Io(e.to_string())
    }
}
