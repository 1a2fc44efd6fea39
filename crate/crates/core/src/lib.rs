//! Classification training with distance-metric regularization of the
//! latent space: contrastive, triplet, N-pair and magnet losses, the
//! PCA-compressed Latent Boost loss with scheduled α/β, silhouette
//! evaluation, and a small MLP trainer built on a reverse-mode tape.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boost;
pub mod cluster;
pub mod error;
pub mod losses;
pub mod metrics;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Numerical guard used for the log argument, variance floor and β floor.
pub const EPSILON: f64 = 1e-8;
