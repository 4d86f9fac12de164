//! Single-image super-resolution toolkit.
//!
//! The crate bundles everything needed to train and run small SRCNN-style
//! enhancement networks on CPU:
//!
//! * [`raster`]: the [`RasterImage`] type, YCbCr conversion, patch extraction
//!   and PNG/PPM/JPEG file I/O.
//! * [`interp`]: nearest, bilinear and bicubic resampling.
//! * [`metrics`]: MSE, PSNR and SSIM.
//! * [`nn`]: a minimal convolutional network engine with backpropagation,
//!   Adam/SGD and a binary checkpoint format.
//! * [`pipeline`]: dataset preprocessing, training, inference, post-processing
//!   modes and denoising filters.
//! * [`eval`]: the PSNR/SSIM comparison harness across scaling methods.
//! * [`synth`]: a procedural generator of cel-shaded illustrations used as a
//!   stand-in corpus in tests and benchmarks.

pub mod error;
pub mod eval;
pub mod interp;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{EvalMethod, EvalReport};
pub use interp::{degrade, scale, ScaleFactor, ScaleMethod};
pub use metrics::{mse, psnr, ssim, MetricValue, SsimParams, SsimWindow};
pub use nn::{Checkpoint, LayerSpec, Network, NetworkSpec, Preset, Tensor};
pub use pipeline::{DenoiseParams, PostProcessMode, TrainConfig};
pub use raster::{PatchPair, RasterImage, YCbCrImage};
