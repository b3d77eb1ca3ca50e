//! Ex2Vec: user and item embeddings learned from repeated-exposure dynamics.
//!
//! The crate is organised around the pipeline it implements:
//!
//! - [`data`]: ingestion, listen labelling, window trimming, k-core filtering,
//!   repetition classes and per-user holdout splits.
//! - [`kernel`]: ACT-R base-level activation and the cutoff exposure kernel.
//! - [`model`]: forward pass, log loss and analytic gradients.
//! - [`train`]: Adam, learning-rate selection and threshold calibration.
//! - [`eval`]: metrics, the BL / BL_fit / Prev baselines and the split harness.
//! - [`analysis`]: listen-fraction / gap / activation curves and the synthetic
//!   population generator.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod data;
pub mod error;
pub mod eval;
pub mod kernel;
pub mod model;
pub mod train;

pub use error::{Error, Result};
