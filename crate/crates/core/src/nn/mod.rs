//! Minimal dense tensors, a gradient tape, and the differentiable
//! primitives the model is assembled from.

pub mod checkpoint;
pub mod gradcheck;
pub mod ops;
pub mod params;
pub mod tape;
pub mod tensor;

pub use gradcheck::{grad_check, grad_check_tape, GradCheckConfig, GradCheckReport};
pub use params::{FfnParams, LinearParams, NormKind, NormParams};
pub use tape::{Backward, Grads, Tape, Var};
pub use tensor::Tensor;
