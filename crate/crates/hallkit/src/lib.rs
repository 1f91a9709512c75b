//! Exact diagonalization of spinless lattice fermions on small tori and the
//! Hall conductance computed three ways: Kubo sum, projector trace, and
//! adiabatic time-domain response, together with flux-averaged Chern numbers.

// `!(x > 0.0)` is used on purpose: it rejects NaN along with the bad values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod hall;
pub mod harness;
pub mod lattice;
pub mod manybody;
pub mod models;
pub mod observables;
pub mod spectra;

pub use error::{Error, Result};

pub type C64 = num_complex::Complex64;
