//! oodkit: out-of-distribution detection toolkit.
//!
//! The pipeline: learn compact features with a fully-connected autoencoder,
//! take the latent activation trace of each sample, fit one of five
//! statistical scorers (kernel density, Mahalanobis distance, kNN distance,
//! local outlier factor, or LCP reconstruction error) on the training
//! traces, and evaluate with ROC/AUC. Every scorer emits scores oriented
//! "higher = more out-of-distribution".
//!
//! Start with the runnable examples (`cargo run --example five_scorers`)
//! or the `oodkit` binary for the file-based pipeline.

pub mod autoencoder;
mod binio;
pub mod data;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod neighbors;
pub mod scorers;

pub use error::{Error, Result};
pub use linalg::{FeatureMatrix, RealVector};
