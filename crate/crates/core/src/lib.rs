//! Exact Reynolds expansions of the incompressible Navier-Stokes equations on
//! the 3-torus, and their a-posteriori analysis through a scalar Riccati
//! control problem.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod data;
pub mod error;
pub mod estimators;
pub mod expansion;
pub mod fields;
pub mod interp;
pub mod numeric;
pub(crate) mod parallel;
pub mod symmetry;
pub mod timebasis;

pub use error::{Error, Result};
