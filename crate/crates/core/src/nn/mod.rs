//! A small reverse-mode autodiff engine: dense rank-3 tensors, a tape of
//! operations, and a scalar abstraction so the same graphs run at f32 for
//! training and f64 for gradient checking.

pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use params::{Bound, ParamId, ParamSet};
pub use scalar::Scalar;
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;
