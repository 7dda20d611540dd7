//! Numerical tools for area-preserving maps of compact surfaces with boundary:
//! capped surfaces and extended maps, periodic orbits, actions and the Calabi
//! invariant, flux and rationality, and equidistribution diagnostics.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod action;
pub mod equidist;
pub mod error;
pub mod expr;
pub mod geometry;
pub mod homology;
pub mod jet;
pub mod linalg;
pub mod maps;
pub mod orbits;
pub mod quadrature;

pub use error::{Error, Result};
pub use geometry::{cap_surface, ChartId, Point, Surface, SurfaceKind};
pub use jet::Jet2;
pub use maps::SurfaceMap;
