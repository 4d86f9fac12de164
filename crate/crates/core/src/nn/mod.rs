//! A small convolutional network engine: same-padded convolution and
//! transposed convolution layers, LeakyReLU/sigmoid activations, MSE loss,
//! backpropagation, Adam/SGD and checkpoint serialization.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking.

mod activation;
pub mod checkpoint;
pub mod conv;
mod network;
mod optim;
mod real;
mod spec;
mod tensor;

pub use activation::Activation;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, TrainingState};
pub use conv::{conv2d_forward, conv2d_transpose_forward, ConvGeometry};
pub use network::{mse_loss, ForwardCache, Gradients, Layer, Network};
pub use optim::{train_step, Optimizer, OptimizerKind};
pub use real::Real;
pub use spec::{LayerKind, LayerSpec, NetworkSpec, Preset};
pub use tensor::Tensor;
