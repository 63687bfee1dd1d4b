//! Kernel regression and plug-in classification when the response may be
//! missing not at random (NMAR).
//!
//! The selection probability is modelled as
//! `pi(z, y) = 1 / (1 + exp(g(z)) * phi(y))` with `g` unknown and `phi`
//! ranging over a totally bounded class of positive functions. This crate
//! provides:
//!
//! * the classical Nadaraya–Watson smoother and the `gamma`-parameterized
//!   plug-in estimator ([`plugin`]);
//! * finite sup-norm covers of the `phi` class ([`cover`]);
//! * data-splitting selection of `phi` by inverse-weighted validation risk
//!   and the resulting regression estimator ([`selection`]);
//! * Horvitz–Thompson inverse-weighted estimators with optional
//!   winsorization ([`ht`]);
//! * plug-in classifiers and excess-risk evaluation ([`classify`]);
//! * synthetic models satisfying the identifiability and positivity
//!   assumptions, plus exact discrete oracles ([`synth`], [`joint`]);
//! * Monte Carlo error integrals and rate fitting ([`metrics`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, configuration
//! and the experiment CLI live in the `nmar` companion crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod classify;
pub mod cover;
pub mod data;
mod error;
pub mod ht;
pub mod joint;
pub mod kernels;
mod math;
pub mod metrics;
mod plan;
pub mod plugin;
pub mod selection;
pub mod synth;

pub use error::{Error, Result};

/// Denominator floor used wherever a kernel ratio would otherwise divide by
/// an (almost) empty observed window.
pub const DENOMINATOR_FLOOR: f64 = 1e-8;
