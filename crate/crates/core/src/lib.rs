//! Analysis on the path space of a stationary simple Bratteli diagram.
//!
//! The path space `X_B` of a diagram defined by a primitive integer matrix `A` is an
//! ultrametric Cantor set with `d(x, y) = lambda^(1 - n(x, y))`, where `lambda` is the
//! Perron-Frobenius eigenvalue of `A` and `n(x, y)` the first index where the paths differ.
//! This crate computes, for finite-depth potentials `psi`:
//!
//! * the Gibbs measure `mu_psi`, its pressure, entropy and relative dimension ([`gibbs`]);
//! * martingale projections, the cylinder eigenbasis and regularity norms ([`functions`]);
//! * the point spectrum of the non-local Laplacian of the form
//!   `E(f, g) = 1/2 ∫∫ (f(x) - f(y))(g(x) - g(y)) d(x, y)^-gamma dmu dmu`, its counting
//!   function, Poincaré and heat-kernel diagnostics ([`spectral`]);
//! * the trace space of the associated LF algebra and the locally constant cohomology
//!   ([`cohomology`]);
//! * the harmonic representative of a cohomology class ([`hodge`]).
//!
//! Everything is evaluated on locally constant functions at a finite level, where all
//! integrals reduce to finite sums and are exact up to floating point. An exact rational
//! mode ([`exact`]) is available for diagrams with integer Perron eigenvalue.

pub mod bratteli;
pub mod cohomology;
pub mod error;
pub mod exact;
pub mod functions;
pub mod gibbs;
pub mod hodge;
pub mod io;
mod linalg;
pub mod spectral;

pub use bratteli::{DiagramData, PathId, PathTree, PerronData};
pub use cohomology::{CohomologySpace, TraceFunctional};
pub use error::{Error, Result};
pub use functions::{EigenBasis, LCFunction};
pub use gibbs::{GibbsData, MeasuredTree, Potential};
pub use hodge::{HodgeProblem, HodgeSolution};
pub use spectral::SpectrumTable;
