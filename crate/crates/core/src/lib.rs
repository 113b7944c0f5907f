//! Volume-preserving spacetime mean curvature flow on asymptotically flat initial data.
//!
//! Surfaces are radial graphs over a Gauss–Legendre sphere grid, evolved with
//! a pseudospectral discretization. The modules follow the data flow:
//! [`ambient`] supplies `(ḡ, K̄)`, [`surface`] computes induced geometry,
//! [`stcurv`] the spacetime mean curvature, [`flow`] integrates the
//! evolution, and [`spectral`] / [`mass`] provide diagnostics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ambient;
pub mod cli;
pub mod error;
pub mod flow;
pub mod mass;
pub mod spectral;
pub mod stcurv;
pub mod surface;

pub use error::{Error, Result};
