//! Nonlocal gradient energies, their local limits, and the second-order
//! rate functionals `(F_0 − F_h)/h²` in one to three dimensions.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod energy1d;
pub mod energynd;
pub mod error;
pub mod functions;
pub mod geometry;
pub mod integrands;
pub mod kernels;
pub mod oracles;
pub mod parallel;
pub mod quadrature;

pub use error::{Error, Result};
