//! Numerics for the anisotropic fractional operator obtained by summing
//! one-dimensional fractional second derivatives over the coordinate axes.
//!
//! The crate provides:
//!
//! * singular quadrature for the coordinate-wise operator applied to
//!   functions and sampled fields ([`quad`]),
//! * a periodic spectral backend with the exact anisotropic symbol
//!   ([`spectral`]),
//! * the associated Green potential with several independent evaluation
//!   routes ([`potential`]),
//! * a normalized fixed-point solver for `u = u^p * G` together with
//!   symmetry, moving-plane, decay and nonexistence-rate diagnostics
//!   ([`solver`]),
//! * Monte Carlo simulation of the driving stable process and an empirical
//!   generator estimate ([`levy`]),
//! * a command line front end ([`cli`]).

// Guard clauses are written `!(x > 0.0)` on purpose: unlike `x <= 0.0`,
// the negated form also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod params;
pub mod levy;
pub mod potential;
pub mod quad;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{DiagonalSign, Hyperplane, HyperplaneKind};
pub use grid::{Field, Grid};
pub use params::{FractionalParams, Normalization};
