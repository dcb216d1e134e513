//! Decomposition of wideband free-space reflection measurements into
//! individual reflections, and inversion of the front-surface reflection
//! into complex permittivity, loss tangent and slab thickness.
//!
//! The pipeline models the measured sweep of a slab as a sparse combination
//! of delay-shifted copies of a metal-plate reference measurement. Pursuit
//! over that shift dictionary recovers the reflections; an iterative delay
//! refinement removes the grid-mismatch error of the fixed dictionary; the
//! strongest early reflection then yields the material parameters.

pub mod dictionary;
pub mod error;
pub mod forward_model;
mod linalg;
pub mod material;
pub mod solvers;

pub use error::{CoreError, CoreResult};
