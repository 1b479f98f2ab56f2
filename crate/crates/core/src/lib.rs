//! Estimation of precision matrices and block-Cholesky factors for Gaussian
//! processes sampled on lattices and on scattered sites.
//!
//! The main entry points are
//!
//! * [`estimator::estimate_precision`] for samples on a regular lattice,
//! * [`matching::embed_and_estimate`] for samples on a scattered point cloud,
//! * [`factor::estimate_cholesky`] for a multiscale block-Cholesky factor,
//! * [`truth`] for ground-truth models and synthetic data.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod estimator;
pub mod experiment;
pub mod factor;
pub mod hierarchy;
pub mod io;
pub mod lattice;
pub mod linalg;
pub mod matching;
#[doc(hidden)]
pub mod testing;
pub mod truth;
pub mod verify;

pub use error::{Error, Result};
pub use linalg::{DenseSymMatrix, LowerTriangular, SampleMatrix};
