//! A small feed-forward CNN stack in double precision.
//!
//! Layers are 2×2 stride-2 convolutions, their transposes, 1×1
//! convolutions, elementwise activations and the torus/padding geometry
//! layers. Backpropagation is written out by hand per layer kind.

pub mod checkpoint;
pub mod gradcheck;
pub mod loss;
pub mod network;
pub mod ops;
pub mod optim;
pub mod tensor;

pub use gradcheck::{grad_check, GradCheckReport};
pub use loss::bce_loss;
pub use network::{ForwardCache, Gradients, LayerKind, LayerSpec, NetworkSpec};
pub use ops::{activation_forward, conv_forward, deconv_forward, geometry_forward, Activation, Geometry};
pub use optim::{Algorithm, Optimizer, OptimizerConfig};
pub use tensor::Tensor;
