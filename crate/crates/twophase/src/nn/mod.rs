//! Minimal reverse-mode autodiff core: tensors, the op set needed for small
//! CNNs, and a bias-corrected Adam optimizer.

pub mod adam;
pub mod graph;
pub mod kernels;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState, NamedGrads, NamedTensors};
pub use graph::{Graph, NodeId};
pub use tensor::{Scalar, Tensor};
