//! File formats, parallel drivers and the command-line tool around
//! [`oofkit_core`].
//!
//! - [`io`]: PNG rasters and the tile-directory reader.
//! - [`dataset`]: source manifests, dataset generation and indexes.
//! - [`formats`]: grid CSV, heatmap PNG, annotations, patch records,
//!   reports and weight files.
//! - [`config`]: TOML run configuration.
//! - [`manifest`]: run manifests with SHA-256 digests, staged outputs.
//! - [`parallel`]: rayon drivers whose results ignore the worker count.
//! - [`cli`]: subcommands.

pub mod cli;
pub mod config;
pub mod dataset;
pub mod error;
pub mod formats;
pub mod io;
pub mod manifest;
pub mod parallel;

pub use error::{Error, Result};
