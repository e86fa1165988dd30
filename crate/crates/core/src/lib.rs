//! Design-based estimation for snowball network samples.
//!
//! The pipeline: a [`graph::Network`] population is sampled with a snowball
//! design ([`design`]), each sampled unit's inclusion probability is
//! estimated by resampling the observed sample network ([`resample`]), and
//! population means are estimated with inverse-frequency weights
//! ([`estimate`]). [`sim`] wraps it all in a reproducible Monte Carlo study
//! and [`spatial`] turns plot-count grids into networks so adaptive spatial
//! designs can reuse the same machinery.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod design;
pub mod error;
pub mod estimate;
pub mod graph;
pub mod resample;
pub mod rng;
pub mod sim;
pub mod spatial;

pub use error::{Error, Result};
