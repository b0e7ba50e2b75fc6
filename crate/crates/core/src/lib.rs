//! Quantum Rabi model transition analysis: exact diagonalization and
//! two-polaron variational ground states, quantum Fisher information,
//! closed-form critical couplings and their fits.

// NaN-rejecting guards are written as negated comparisons on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod critical;
pub mod ed;
pub mod error;
pub mod model;
pub mod observables;
pub mod polaron;
pub mod qfi;
pub mod quadrature;
pub mod store;
pub mod tridiag;

pub use error::{QrmError, Result};
pub use model::ModelParams;
