//! PAC-private zeroth-order training.
//!
//! A training step probes the loss along one public random direction, reduces
//! every candidate training subset to a single sign, and releases one bit about
//! the secret subset. The bit is either free (every plausible candidate agrees),
//! noised so that it leaks exactly a chosen number of nats, or replaced by a fair
//! coin. The crate provides:
//!
//! * [`channel`]: exact mutual information of a binary input through Gaussian
//!   noise, and its inverse used to calibrate the noise.
//! * [`zo`]: two-point estimation, toy loss tasks and the training loop.
//! * [`mechanism`]: subset designs, posterior tracking and the per-step releases.
//! * [`accounting`]: MI ledgers, transcript validation and membership-inference bounds.
//! * [`adversary`]: a Bayes-optimal membership-inference attack on transcripts.
//! * [`harness`]: experiment configuration, persistence and sweeps.
//!
//! All information quantities are in nats.

// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accounting;
pub mod adversary;
pub mod channel;
mod error;
pub mod harness;
pub mod mechanism;
pub mod rng;
pub mod transcript;
pub mod zo;

pub use error::{Error, Result};
