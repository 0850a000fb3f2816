//! Algorithms for synthesizing, detecting and evaluating out-of-focus (OOF)
//! blur in histology-style RGB patches.
//!
//! The crate is `no_std` with `alloc`. The `std` feature (on by default)
//! pulls in the frequency-domain convolution path used for large blur kernels;
//! without it every blur runs as a direct spatial convolution.
//!
//! Module map:
//!
//! - [`raster`], [`kernel`], [`blur`]: raster type, luma, blur kernels and
//!   convolution engines.
//! - [`degrade`]: the class → blur-magnitude scheme, Poisson noise, JPEG
//!   round trip and the composed per-patch degradation pipeline.
//! - [`sampler`]: tissue detection, candidate patch selection, dataset
//!   assembly and training-time augmentation.
//! - [`model`]: the 30-class truncated convolutional classifier.
//! - [`heatmap`]: sliding-window inference and jet rendering.
//! - [`eval`]: rank correlation, regression, AUC, bootstrap and z-stack
//!   statistics.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod blur;
pub mod degrade;
pub mod error;
pub mod eval;
pub mod heatmap;
pub mod kernel;
pub mod model;
pub mod raster;
pub mod rng;
pub mod sampler;
pub mod synth;

pub use error::{Error, Result};
pub use raster::RasterPatch;

/// Number of fine-grained focus classes predicted by the model.
pub const NUM_CLASSES: usize = 30;

/// Side length of the square classifier input, in pixels.
pub const PATCH_SIZE: usize = 139;

/// Side length of the square source patches that get degraded.
pub const SOURCE_SIZE: usize = 300;

/// Heatmap and tissue-grid cell size, in pixels.
pub const CELL_SIZE: usize = 128;
