//! Nonlinear Hawkes processes and the Malliavin calculus of their jump times.
//!
//! The crate simulates paths by thinning, evaluates their densities, and
//! builds integration-by-parts weights by perturbing jump times along a
//! direction `m` on `[0, T]`. The same weights drive sensitivity analysis of
//! jump SDEs and Malliavin-weight Greeks.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod density;
pub mod digest;
pub mod error;
pub mod experiments;
pub mod greeks;
pub mod malliavin;
pub mod model;
pub mod numeric;
pub mod parallel;
pub mod rng;
pub mod sde;
pub mod simulate;
pub mod stats;

pub use error::{Error, Result};
pub use model::{validate_assumptions, Baseline, HawkesModel, Kernel, Nonlinearity};
pub use parallel::Parallelism;
pub use simulate::{simulate_batch, simulate_path, HawkesPath, PathBatch};
