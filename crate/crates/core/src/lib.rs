//! Moran-type population dynamics with exchangeable breeding and fitness-based
//! selection.
//!
//! The crate is organised around six modules:
//!
//! * [`measures`]: type spaces, probability measures, the scaled fitness,
//!   quadrature and distances.
//! * [`breeding`]: Pólya-urn and finite-mixture predictive samplers.
//! * [`selection`]: the tournament and inverse-fitness kernels, plus exact
//!   transition matrices for small finite instances.
//! * [`chain`]: the MCMC driver and exact stationary laws.
//! * [`limits`]: threshold checks, θ fixed points, limit measures and the
//!   entropy-regularised objective.
//! * [`verify`]: detailed balance, Monte Carlo vs exact comparisons and
//!   convergence sweeps.

pub mod breeding;
pub mod chain;
mod error;
pub mod limits;
pub mod measures;
pub mod rng;
pub mod selection;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
