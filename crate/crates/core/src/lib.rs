//! Gray-box hyperparameter optimization on tabular learning-curve benchmarks.
//!
//! The crate is `no_std` (with `alloc`) and contains the algorithms only:
//! benchmark tables and budget accounting, configuration encoding, the
//! deep-kernel GP surrogate, multi-fidelity expected improvement, the
//! one-step-at-a-time optimizer loop, bandit-style baselines and the
//! evaluation metrics. File formats and the command line live in the
//! `graybox` crate.
#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod acquisition;
pub mod baselines;
pub mod benchmark;
pub mod encoding;
pub mod error;
pub mod metrics;
pub mod optimizer;
pub mod rng;
pub mod surrogate;
pub mod trace;

pub use error::{Error, Result};
