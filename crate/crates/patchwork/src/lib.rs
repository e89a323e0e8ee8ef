//! Patch-vocabulary image generation from a handful of training images.
//!
//! The model learns the joint patch distribution of a small set of training
//! images: a quantized coarse scale (encoder, learnable codebook with
//! positional slots, decoder) captures a discrete patch vocabulary, residual
//! patch-GAN scales add detail, and an autoregressive prior over the code
//! grid drives unconditional sampling, inpainting and harmonization.
//!
//! Everything runs on the CPU in f64 on top of a small reverse-mode autodiff
//! engine (see [`tensor`]), which keeps the gradient checks in the test suite
//! at double precision.

pub mod error;
pub mod generators;
pub mod io;
pub mod losses;
pub mod manipulate;
pub mod metrics;
pub mod nn;
pub mod prior;
pub mod trainer;
pub mod quantizer;
pub mod tensor;
pub mod util;

pub use error::{Error, Result};
