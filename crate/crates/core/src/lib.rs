//! Competitive training of mixtures of independent generative models.
//!
//! K generative models compete for training points. Each round every model
//! trains only on the points it owns, a per-model discriminator estimates how
//! likely each training point is under that model, and every point is handed
//! to the model that explains it best. With a degenerate model (a single
//! centroid) and a nearest-centroid likelihood the procedure is exactly
//! Lloyd's k-means.
//!
//! Module map:
//!
//! - [`nn`]: dense networks, reverse-mode gradients, Adam, parameter blobs.
//! - [`models`]: the Gaussian VAE and the degenerate centroid model.
//! - [`discriminators`]: density-ratio classifiers and likelihood tables.
//! - [`partition`]: hard assignment, mixing weights, load balancing.
//! - [`trainer`]: the alternating outer loop.
//! - [`data`]: synthetic Gaussian-mixture data and CSV IO.
//! - [`eval`]: KDE log-likelihood, f-divergences, Lloyd oracle, cluster metrics.

// `!(x >= 0.0)` deliberately rejects NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod discriminators;
pub mod error;
pub mod eval;
pub mod models;
pub mod nn;
pub mod partition;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};
