//! 1-D inverse medium scattering toolkit.
//!
//! Reconstructs a dielectric profile `c(x)` on `[0, 1]` from multi-frequency
//! boundary measurements of a point-source Helmholtz field. The forward side
//! solves the Lippmann-Schwinger integral equation; the inverse side minimizes
//! a Carleman-weighted least-squares functional that is strictly convex on
//! bounded balls of the search space, so plain gradient descent from zero
//! converges without an initial guess near the solution.
//!
//! Pipeline: [`forward::synthesize_data`] (or [`dataprep::ingest_external`])
//! -> [`dataprep::prepare`] -> [`tail::qrm_tail`] -> [`minimize::run`] ->
//! [`reconstruct::reconstruct`]. [`pipeline::invert`] wires the inverse half
//! together; the [`verify`] module probes the inequalities the construction
//! relies on (Carleman estimate, convexity gap, Lipschitz gradient).

// index-based loops over small dense kernels are the house style here
#![allow(clippy::needless_range_loop)]

pub mod dataprep;
pub mod error;
pub mod forward;
pub mod functional;
pub mod grid;
pub mod layered;
pub mod minimize;
mod par;
pub mod pipeline;
pub mod reconstruct;
pub mod tail;
pub mod verify;

pub use error::{Error, Result};
pub use grid::{ComplexField, SpatialGrid, WavenumberGrid};
