//! Enhanced masked sampling over discrete token sequences.
//!
//! A time series is tokenized against a k-means codebook, a prior predicts
//! categorical distributions for MASK slots, and the samplers in [`sampler`]
//! decode token sequences from the prior. [`eval`] scores generated samples
//! against ground truth, exactly where the token space is enumerable and
//! through summary features otherwise.

pub mod data;
pub mod error;
pub mod eval;
pub mod prior;
pub mod quantizer;
pub mod sampler;
pub mod schedule;
pub mod token;

pub use error::{Error, Result};
