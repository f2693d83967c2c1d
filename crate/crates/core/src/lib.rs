//! Two-dimensional inverse scattering from multi-tone channel observations.

pub mod cli;
pub mod diagnostics;
pub mod em;
pub mod error;
pub mod forward;
pub mod inversion;
pub mod linalg;
pub mod lsm;
pub mod rng;
pub mod scenarios;

pub use error::{Error, Result};
