//! Multi-objective sampling and optimization with compositional energy-based models.
//!
//! The crate provides four chain samplers over a set of differentiable energies:
//!
//! - **MGD**: multiple gradient descent along the min-norm element of the convex hull of
//!   the per-objective gradients.
//! - **cEBM**: unadjusted Langevin dynamics on the summed energy (product of experts).
//! - **ls-cEBM**: Langevin dynamics on a fixed linear scalarization of the energies.
//! - **pcEBM**: Langevin dynamics whose drift is the MGD min-norm direction, re-solved at
//!   every step.
//!
//! Around them sit the evaluation metrics (hypervolume, edit distance, convergence
//! statistics) and a sweep harness that writes reproducible report bundles.

pub mod domain;
pub mod energy;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod moo;
pub mod rng;
pub mod samplers;

pub use error::{Error, Result};
