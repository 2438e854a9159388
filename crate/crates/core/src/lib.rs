//! Exact dense verification of iterated gauging: finite groups and their
//! cocycles, Frobenius algebras, 1D and 2D gauging maps, quantum double
//! stabilizers with a smooth boundary, and the PEPS built from the gauging
//! layers.

pub mod cli;
pub mod error;
pub mod frobenius;
pub mod gauge1d;
pub mod gauge_higher;
pub mod groups;
pub mod hilbert;
pub mod lattice;
pub mod linalg;
pub mod qdouble;
pub mod report;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
