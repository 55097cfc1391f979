//! Dense tensors, reverse-mode gradients, and a finite-difference verifier.

mod gradcheck;
mod params;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, relative_error, GradCheckReport, ParamCheck};
pub use params::{Gradients, ParamRegistry};
pub use tape::{softmax, Tape, Var};
pub use tensor::{Mode, Tensor};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("{op}: dimension mismatch between {left:?} and {right:?}")]
    Shape { op: &'static str, left: Vec<usize>, right: Vec<usize> },
    #[error("{op}: expected rank {expected}, got shape {shape:?}")]
    Rank { op: &'static str, expected: usize, shape: Vec<usize> },
    #[error("{0}")]
    Domain(String),
    #[error("{0}: zero vector has no direction")]
    ZeroVector(&'static str),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{0}` registered twice")]
    DuplicateParam(String),
}
