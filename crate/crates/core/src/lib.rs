//! Finite-time torsion of annulus diffeomorphisms.
//!
//! Angles are in turns throughout; the reference direction is the positive
//! vertical `(0, 1)` and counterclockwise is positive.

// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curves;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod models;
pub mod tilt;
pub mod torsion;
pub mod unwrap;

pub use error::{Error, Result};
