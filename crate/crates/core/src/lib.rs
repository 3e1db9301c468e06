//! Minimum penalized Hellinger distance estimation for binned discrete data,
//! and a studentized indicator for choosing between two non-nested models.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: cell partitions, probability vectors, parametric cell models
//!   and the Poisson/geometric mixture used to generate data.
//! - [`divergence`]: φ-divergences, the (penalized) Hellinger distance and its
//!   gradients with respect to both arguments.
//! - [`estimate`]: minimum-distance and binned maximum-likelihood fits on top
//!   of a deterministic bounded minimizer ([`optimize`]).
//! - [`asymptotics`]: Jacobian, Fisher information, multinomial covariance and
//!   the sandwich matrices used for limiting variances.
//! - [`inference`]: goodness-of-fit test, power and sample size, and the
//!   two-model selection statistic.
//! - [`simharness`]: seeded Monte Carlo replication of selection experiments.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod divergence;
pub mod error;
pub mod estimate;
pub mod inference;
pub mod model;
pub mod optimize;
pub mod simharness;
pub mod special;

pub use error::{Error, Result};
