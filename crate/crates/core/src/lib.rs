//! Perturbed geodesic spheres, Hawking-mass expansions and Bartnik lower bounds
//! in analytic Riemannian 3-manifolds.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

pub mod commands;
pub mod config;
pub mod error;
pub mod expansion;
pub mod geodesics;
pub mod harmonics;
pub mod linalg;
pub mod manifold;
pub mod optimizer;
pub mod real;
pub mod report;
pub mod surface;

pub use error::{LabError, Result};
