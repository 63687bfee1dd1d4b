//! File formats, configuration, Monte Carlo experiments and plotting on
//! top of [`nmar_core`].

pub mod config;
mod error;
pub mod experiment;
pub mod io;
pub mod plot;

pub use error::{Error, Result};
pub use nmar_core as core;
