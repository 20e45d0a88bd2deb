//! Vector contraction analysis of nonlinear systems.
//!
//! The distance between neighbouring trajectories is measured by a
//! vector-valued norm `D(δx) = A·dvec(diag(δx)²)` ([`vnorm`]) and bounded by
//! the solution of a comparison system ([`comparison`]), in componentwise
//! order or relative to a polyhedral cone ([`cone`]). [`dynamics`] integrates
//! the system together with its variational system; [`scenario`] and [`cli`]
//! wire the pieces to JSON configs and the `veccontract` binary.

// `!(a > b)` deliberately treats NaN as failing the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod comparison;
pub mod cone;
pub mod dynamics;
pub mod expr;
pub mod linalg;
pub mod presets;
pub mod sampling;
pub mod scenario;
pub mod vnorm;
