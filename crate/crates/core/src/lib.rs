//! Impulse response estimation for noisy single-input single-output LTI
//! systems with joint selection of time delay, response length and noise
//! variance by minimizing a worst-case relative-entropy bound.
//!
//! * [`signals`]: inputs, simulation and noise.
//! * [`linalg`]: Toeplitz slices, least squares and projectors.
//! * [`estimator`]: bounds and the batch grid search.
//! * [`online`]: recursive updates, online re-selection and stopping.
//! * [`baselines`]: AIC / BIC order selection.
//! * [`experiments`]: benchmark systems and Monte-Carlo tables.
//! * [`cli`]: the `re-sysid` command line.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod signals;
pub mod linalg;
pub mod estimator;
pub mod online;
pub mod baselines;
pub mod experiments;
pub mod cli;

pub use error::{Error, Result};
