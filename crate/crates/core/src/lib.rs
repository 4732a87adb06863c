//! Robust linear regression under heavy tails and adversarial contamination.
//!
//! The building block is covariate filtering: a spectral outlier filter that
//! removes a small number of high-leverage rows before a classical estimator
//! (Huber, least trimmed squares, least absolute deviation) is fitted on the
//! surviving rows. Around it sit stability certifiers for small point sets,
//! a median-of-means post-processing step, seeded synthetic data generators
//! and a Monte-Carlo trial harness.
//!
//! All numerical code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0)` also rejects NaN

pub mod datagen;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod filtering;
pub mod huber;
pub mod lad;
pub mod lts;
pub mod numerics;
pub mod postprocess;
pub mod scalar;
pub mod stability;

pub use error::{RegressionError, Result};
pub use estimator::EstimatorResult;
pub use numerics::Matrix;
pub use scalar::Scalar;

/// Dense row-major matrix of `f64`.
pub type Matrix64 = numerics::Matrix<f64>;
/// Dense row-major matrix of `f32`.
pub type Matrix32 = numerics::Matrix<f32>;
/// Estimator output with `f64` coefficients.
pub type EstimatorResult64 = estimator::EstimatorResult<f64>;
/// Estimator output with `f32` coefficients.
pub type EstimatorResult32 = estimator::EstimatorResult<f32>;
/// Covariate filter settings for `f64` data.
pub type FilterConfig64 = filtering::FilterConfig<f64>;
/// Synthetic linear-model draw with `f64` entries.
pub type LinearModelDraw64 = datagen::LinearModelDraw<f64>;
