//! Event-driven simulation and numerical analysis of the symmetric exclusion
//! process with heavy-tailed long jumps in contact with extended boundary
//! reservoirs, together with the nonlocal operators and density evolutions
//! that describe its large-scale behaviour.
//!
//! Modules:
//! - [`kernel`]: the jump distribution, reservoir tail rates, time scales;
//! - [`process`]: kinetic Monte Carlo dynamics of the particle system;
//! - [`operators`]: regional fractional Laplacian, Gagliardo seminorm,
//!   boundary derivatives, discrete-to-continuum diagnostics;
//! - [`evolution`]: deterministic mean-occupation ODE, stationary profiles,
//!   regime classification, weak-formulation residuals;
//! - [`observables`]: empirical measures, block averages, ensemble and
//!   energy statistics.

pub mod error;
pub mod evolution;
pub mod fenwick;
pub mod kernel;
pub mod observables;
pub mod operators;
pub mod process;
mod quad;

pub use error::{Error, Result};
pub use kernel::{JumpKernel, ModelParams, Variant};
