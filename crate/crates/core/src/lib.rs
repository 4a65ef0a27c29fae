//! Time-space adaptive solver for the advective Allen-Cahn equation
//! `u_t - eps Δu + ∇·(V u) + f(u)/eps = 0` on `[-1,1]^2` with homogeneous
//! Neumann data.
//!
//! Space is discretized with piecewise-linear symmetric interior penalty
//! discontinuous Galerkin elements on a bisection hierarchy, time with the
//! linearly implicit Rosenbrock pair ROS3P. The [`driver`] couples both through
//! embedded temporal error control and an auxiliary fine-mesh spatial estimate.

// Index loops follow the matrix notation of the element kernels, quadrature
// constants keep their published digits, and `!(x > 0.0)` checks reject NaN.
#![allow(
    clippy::needless_range_loop,
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord
)]

pub mod adapt;
pub mod dgspace;
pub mod driver;
pub mod error;
pub mod mesh;
pub mod quadrature;
pub mod ros3p;
pub mod sipg;
pub mod sparse;
pub mod velocity;

pub use error::{AmotError, Result};
