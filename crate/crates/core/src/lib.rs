//! Numerical laboratory for Kerr-cat qubit initialization under a
//! pump-induced frequency shift.

// `!(x > 0.0)` is used deliberately so that NaN inputs are rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod circuit;
pub mod dynamics;
pub mod error;
pub mod fit;
pub mod fock;
pub mod linalg;
pub mod schedule;
pub mod tomography;

pub use error::{Error, Result};
