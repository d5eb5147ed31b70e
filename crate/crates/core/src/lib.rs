//! Numerical toolkit for the energetics of misfit dislocations at a
//! semi-coherent interface between two cubic lattices with lattice ratio
//! `alpha > 1`.
//!
//! The crate is split along the physical story:
//!
//! * [`material`] holds the material constants and the closed-form energy,
//!   length and line-tension formulas.
//! * [`theta`] optimizes the scalar polynomial energy in the interface size
//!   ratio `theta`, with a golden-section oracle for cross-checking.
//! * [`pyramid`] builds the explicit double-pyramid transition field, its
//!   energies, and the periodic dislocation array with Burgers bookkeeping.
//! * [`corrector`] solves the linearized elastic corrector problem on the unit
//!   box with trilinear hexahedra, and the nonlinear problem it linearizes.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod corrector;
pub mod error;
pub mod kinematics;
pub mod material;
pub mod pyramid;
pub mod quadrature;
pub mod search;
pub mod stats;
pub mod theta;

pub use error::{Error, Result};
