//! Construction and verification of global invariant manifolds for perturbed
//! linear random dynamical systems with generalized dichotomies.
//!
//! The base flow lives in [`driving`], the linear part and its dichotomy
//! bounds in [`cocycle`], the nonlinearity and the constants it induces in
//! [`perturbation`], the fixed-point construction in [`solver`], and the
//! a-posteriori checks of the resulting manifold in [`rds`].

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod cli;
pub mod cocycle;
pub mod config;
pub mod driving;
pub mod error;
pub mod linalg;
pub mod perturbation;
pub mod presets;
pub mod rds;
pub mod report;
pub mod solver;

pub use error::{Error, Result};
