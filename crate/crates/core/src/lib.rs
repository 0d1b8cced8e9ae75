//! Numerical laboratory for parabolic Pucci-type solution classes.
//!
//! * [`linalg`]: symmetric eigenproblems for the operator evaluations.
//! * [`grid`]: space-time lattices, grid functions, stencils and file I/O.
//! * [`operators`]: Pucci extremals, the normalized p-Laplacian and class checks.
//! * [`solver`]: explicit time marching for Dirichlet problems.
//! * [`regularity`]: dyadic linear fits, decay sequences and rescaling.

pub mod grid;
pub mod linalg;
pub mod operators;
pub mod regularity;
pub mod solver;
