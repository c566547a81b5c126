//! Weighted empirical risk minimization (WERM) for biased training samples.
//!
//! When training data are drawn from a distribution `P'` that differs from the
//! test distribution `P`, weighting each training loss by the likelihood ratio
//! `dP/dP'` restores an unbiased risk estimate. This crate computes plug-in
//! estimates of those weights from auxiliary information on `P` for four
//! selection-bias settings:
//!
//! * class-probability shift ([`weights::class_shift_weights`]),
//! * stratum shift ([`weights::stratum_shift_weights`]),
//! * positive-unlabeled learning ([`weights::pu_weights`], [`weights::pu_weights_eta`]),
//! * right censoring ([`weights::ipcw_weights`] with a Kaplan-Meier fit).
//!
//! Around the weights sit the pieces needed to check the method end to end:
//! a closed-form binary problem with exact risks ([`analytic`]), evaluable
//! generalization and deviation bounds with Monte-Carlo coverage checks
//! ([`bounds`]), a power-law bias generator ([`biasgen`]), a small weighted
//! softmax trainer ([`train`]) and a seeded experiment runner ([`experiment`]).

pub mod analytic;
pub mod biasgen;
pub mod bounds;
pub mod data;
mod error;
pub mod experiment;
pub mod io;
pub mod risk;
pub mod seed;
pub mod train;
pub mod weights;

pub use data::{Dataset, Record, WeightVector};
pub use error::{Error, Result};
pub use risk::LossSpec;
