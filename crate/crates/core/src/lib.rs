//! Calibration core for a continuous-space SIR agent-based epidemic model.
//!
//! Everything in this crate is pure computation over `alloc`: the parameter
//! space, the Sobol generator, the simulator, the Kolmogorov–Smirnov
//! objective, the surrogate models, the search strategies and the
//! calibration loop. File formats, parallel evaluation and the CLI live in
//! the `abmcal` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod abm;
pub mod error;
pub mod framework;
pub mod ks;
pub mod linalg;
pub mod metrics;
pub mod rng;
pub mod sobol;
pub mod space;
pub mod strategies;
pub mod surrogate;

pub use error::{Error, Result};
