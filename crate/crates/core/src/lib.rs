//! Audit generated-image detection corpora for JPEG-compression and
//! image-size biases, build debiased training splits, measure how exploitable
//! a bias is with a metadata-only probe, and evaluate detector predictions.

pub mod error;
pub mod formats;
pub mod transcode;
pub mod audit;
pub mod cli;
pub mod debias;
pub mod evalharness;
pub mod probe;
mod sampling;
pub mod synth;

pub use error::{Error, Result};
