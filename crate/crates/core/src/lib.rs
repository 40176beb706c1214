//! Numerical toolkit for the degenerate Heston pricing equation.
//!
//! The crate covers four connected concerns:
//!
//! * where boundary conditions have to be imposed ([`fichera`]) for the
//!   operator variants assembled in [`heston_model`];
//! * closed-form solutions with zero terminal data that break uniqueness
//!   ([`witness`]) and the changes of variables linking them ([`transform`]);
//! * finite-difference solvers for the one-dimensional reductions ([`pde1d`])
//!   and the two-factor equation ([`heston2d`]), with a characteristic-function
//!   pricer ([`analytic_pricer`]) as the reference solution;
//! * growth-class membership checks on sampled functions ([`growth`]).
//!
//! Data-parallel loops go through [`par`], which uses rayon when the
//! `parallel` feature is enabled (the default) and plain iterators otherwise.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
pub mod analytic_pricer;
pub mod error;
pub mod fichera;
pub mod grid;
pub mod growth;
pub mod heston2d;
pub mod heston_model;
pub mod interp;
pub mod par;
pub mod pde1d;
pub mod quadrature;
pub mod transform;
pub mod tridiag;
pub mod witness;

pub use error::{Error, Result};
