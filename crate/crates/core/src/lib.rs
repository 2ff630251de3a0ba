//! Coupled tensor factorization for time-aware, feature-aware top-n
//! recommendation from implicit feedback.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, ingestion from
//! disk and the command-line driver live in the `tensorrec` crate.
//!
//! - [`data`]: interaction logs → k-core → weekly grid → tensor + coupled matrices → split
//! - [`features`]: per-item side-feature matrix, normalization, synthetic features
//! - [`models`]: the factorized predictors and the baselines, top-n ranking
//! - [`training`]: pairwise-ranking and squared-loss training, gradient checking
//! - [`eval`]: Recall@n / NDCG@n harness and model comparison
//! - [`synth`]: planted-structure synthetic corpora
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod math;
pub mod matrix;
pub mod models;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
pub use matrix::Matrix;
